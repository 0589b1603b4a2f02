#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glassbox/feature_groups.hpp"
#include "glassbox/tensor.hpp"
#include "json.hpp"

namespace glassbox {

struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;        // 1.0 where the column is constant
  std::vector<bool> constant_column;

  std::vector<double> apply(std::span<const double> row) const;
  nlohmann::json to_json() const;
  static Standardization from_json(const nlohmann::json& j);
  bool operator==(const Standardization&) const = default;
};

// Row-major labeled table. Optional per-row tags carry planted ground truth
// (relevant group) and probe categories for diagnostics.
struct Dataset {
  std::string id;
  std::size_t num_rows = 0;
  std::size_t num_features = 0;
  std::size_t num_classes = 2;
  std::vector<double> features;
  std::vector<std::size_t> labels;
  std::vector<std::string> feature_names;
  std::string label_name = "label";
  std::vector<int> relevant_group;       // empty, or one entry per row
  std::vector<std::string> categories;   // empty, or one entry per row
  std::optional<Standardization> standardization;
  std::optional<FeatureGroupSpec> default_groups;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * num_features, num_features);
  }
  // Rows gathered into a [rows, num_features] tensor (no gradient).
  Tensor batch(std::span<const std::size_t> rows) const;
  Dataset subset(std::span<const std::size_t> rows) const;
  // Checks row counts across fields and label range; throws ValidationError.
  void validate() const;
  bool has_categories() const { return !categories.empty(); }
  std::vector<std::string> category_names() const;  // sorted, unique
};

enum class SyntheticKind { kPlantedLinear, kSwitchMoe, kMultiSkill };

std::string to_string(SyntheticKind kind);
SyntheticKind synthetic_kind_from_string(const std::string& name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kSwitchMoe;
  std::size_t num_features = 12;
  std::size_t num_groups = 3;
  std::size_t n_samples = 2000;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

// Deterministic generator with planted ground truth; see README for the
// construction of each kind. Features are i.i.d. standard normal.
Dataset gen_synthetic(const SyntheticSpec& spec);

// Logit of the planted generator for a switch_moe dataset built from `spec`:
// relu(s) * rule_a(x) + relu(-s) * rule_b(x), with s the switch feature.
// Exposed so tests can validate the ground-truth tags against exact Shapley.
double switch_moe_generator(const SyntheticSpec& spec, std::span<const double> x);
// Index of the switch feature for switch_moe.
constexpr std::size_t kSwitchFeature = 0;

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::optional<std::string>& category_column = std::nullopt);
void write_csv(const Dataset& data, const std::filesystem::path& path);

// Per-feature mean/std of `data` (population std). Constant columns get std 1.
Standardization fit_standardization(const Dataset& data);
Dataset apply_standardization(const Dataset& data, const Standardization& stats);
// Fit on `data` itself and apply; returns the standardized copy and its stats.
std::pair<Dataset, Standardization> standardize(const Dataset& data);

// Stratified, seeded split. Standardization is fit on the train part only and
// applied to both parts.
std::pair<Dataset, Dataset> split(const Dataset& data, std::array<double, 2> fractions,
                                  std::uint64_t seed, bool standardize_parts = true);

}  // namespace glassbox
