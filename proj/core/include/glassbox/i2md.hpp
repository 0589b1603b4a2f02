#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glassbox/checkpoint.hpp"
#include "glassbox/data.hpp"
#include "glassbox/explanation.hpp"
#include "glassbox/model.hpp"
#include "glassbox/optim.hpp"
#include "json.hpp"

namespace glassbox {

// Iterative model diagnostics: score probe datasets on training snapshots,
// diff the scores over time and feed weak categories back into sampling.

enum class ProbeMetric { kAccuracy };

struct Probe {
  std::string name;
  Dataset data;
  ProbeMetric metric = ProbeMetric::kAccuracy;
};

class ProbeSuite {
 public:
  // Throws ValidationError on duplicate names or empty datasets.
  explicit ProbeSuite(std::vector<Probe> probes);
  // One probe per category tag of `data`, named after the category.
  static ProbeSuite from_categories(const Dataset& data);

  const std::vector<Probe>& probes() const { return probes_; }
  std::vector<std::string> names() const;
  std::size_t size() const { return probes_.size(); }

 private:
  std::vector<Probe> probes_;
};

struct ProbeScore {
  std::string probe;
  double score = 0.0;
  std::size_t n = 0;
  bool operator==(const ProbeScore&) const = default;
};

struct ProbeReport {
  std::string checkpoint_id;
  std::uint64_t step = 0;
  std::vector<ProbeScore> scores;  // suite order
  double wall_clock_ms = 0.0;

  double score(const std::string& probe) const;
  nlohmann::json to_json(LatencyField latency = LatencyField::kInclude) const;
  static ProbeReport from_json(const nlohmann::json& j);
};

ProbeReport evaluate_model(const Model& model, const ProbeSuite& suite,
                           const std::string& checkpoint_id = "", std::uint64_t step = 0);
ProbeReport evaluate_snapshot(const Checkpoint& checkpoint, const ProbeSuite& suite);

enum class SkillChange { kGained, kLost, kStable };
std::string to_string(SkillChange change);

struct ProbeDelta {
  std::string probe;
  double delta = 0.0;  // to - from
  SkillChange change = SkillChange::kStable;
};

struct DiagnosticDelta {
  std::uint64_t from_step = 0;
  std::uint64_t to_step = 0;
  double stability_band = 0.05;
  std::vector<ProbeDelta> probes;

  nlohmann::json to_json() const;
};

constexpr double kDefaultStabilityBand = 0.05;
constexpr double kDefaultSkillThreshold = 0.8;

// Reports must cover the same probes in the same order (ValidationError
// otherwise). Either step order is accepted, so diff(a,b) = -diff(b,a).
DiagnosticDelta diff_diagnostics(const ProbeReport& from, const ProbeReport& to,
                                 double stability_band = kDefaultStabilityBand);

// Per-example sampling weights (sum 1): examples whose category scores below
// `skill_threshold` in `report` get `boost` times the uniform weight before
// renormalizing. Categories without a probe are left alone.
std::vector<double> targeted_resample(const Dataset& train, const ProbeReport& report,
                                      double boost,
                                      double skill_threshold = kDefaultSkillThreshold);

struct Timeline {
  std::vector<std::string> probes;
  std::vector<std::uint64_t> steps;
  std::vector<std::vector<double>> scores;  // [probe][snapshot]
  std::vector<std::optional<std::uint64_t>> acquisition_step;
  std::vector<std::string> checkpoint_ids;
  double skill_threshold = kDefaultSkillThreshold;

  nlohmann::json to_json() const;
  // Long format: step,checkpoint_id,probe,score
  std::string to_csv() const;
};

// Needs at least two reports over one suite. Unsorted input is sorted by step
// with a warning on stderr.
Timeline timeline_report(std::vector<ProbeReport> reports,
                         double skill_threshold = kDefaultSkillThreshold);

struct DiagnosticsConfig {
  std::size_t total_steps = 2000;
  std::size_t cadence = 100;
  std::size_t batch_size = 32;
  double learning_rate = 3e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  // 1 disables resampling; otherwise weights switch after the midpoint snapshot.
  double resample_boost = 1.0;
  double skill_threshold = kDefaultSkillThreshold;
  double stability_band = kDefaultStabilityBand;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static DiagnosticsConfig from_json(const nlohmann::json& j);
};

struct DiagnosticsRun {
  std::vector<ProbeReport> reports;
  Timeline timeline;
  std::vector<DiagnosticDelta> deltas;  // consecutive snapshots
  std::optional<std::uint64_t> resample_step;
  std::vector<double> final_weights;
};

// Step-based minibatch training (batches drawn with replacement from the
// current sampling weights), snapshotting every `cadence` steps including
// step 0 and the final step. Snapshots are persisted when `store` is given.
DiagnosticsRun run_diagnostics(Model& model, const Dataset& train, const ProbeSuite& suite,
                               const DiagnosticsConfig& config, CheckpointStore* store = nullptr,
                               const nlohmann::json& fingerprint = nlohmann::json::object());

}  // namespace glassbox
