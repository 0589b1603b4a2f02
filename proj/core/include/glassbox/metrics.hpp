#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassbox/explainers.hpp"
#include "glassbox/explanation.hpp"
#include "json.hpp"

namespace glassbox {

// Feature indices ordered by |attribution| descending, ties to the lower index.
std::vector<std::size_t> rank_features(const Explanation& e);
std::vector<std::size_t> top_k_features(const Explanation& e, std::size_t k);

// PGI removes the k most important features, PGU the k least important.
enum class GapDirection { kImportant, kUnimportant };

// |f(x)[c] - f(x')[c]| where x' imputes the selected k features to `baseline`
// and c is the explanation's target class (arg-max at x when unset).
double prediction_gap(const BlackBox& f, std::span<const double> x, const Explanation& e,
                      std::size_t k, GapDirection direction, std::span<const double> baseline);

// |top_k(e1) ∩ top_k(e2)| / k on absolute attributions.
double rank_agreement(const Explanation& e1, const Explanation& e2, std::size_t k);

// Jensen-Shannon divergence (nats) between p_i = (|a_i| + eps) / sum_j (|a_j| + eps)
// distributions, eps = 1e-12. Bounded by ln 2.
double js_distance(const Explanation& e1, const Explanation& e2);

enum class AgreementMetric { kRankAgreement, kJsDistance };
std::string to_string(AgreementMetric metric);

struct DisagreementMatrix {
  std::vector<std::string> methods;
  std::vector<std::vector<double>> values;
  std::string metric_name;
  std::optional<std::size_t> k;

  double mean_off_diagonal() const;
  nlohmann::json to_json() const;
};

// Pairwise metric over explanations of one instance. Local explanations must
// share an instance id; global explanations (no id) may join any instance.
DisagreementMatrix disagreement_matrix(std::span<const Explanation> explanations,
                                       AgreementMetric metric, std::size_t k = 5);

struct ConsistencyReport {
  std::string method;
  std::size_t n_seeds = 0;
  std::size_t k = 0;
  std::vector<double> pairwise;  // rank agreement of every seed pair (i < j)
  double mean = 0.0;
  double min = 0.0;

  double variance() const;
  nlohmann::json to_json() const;
};

// Runs `explain` with seeds 0..n_seeds-1 on x and compares every pair.
ConsistencyReport consistency_across_seeds(const std::string& method, const ExplainFn& explain,
                                           std::span<const double> x, std::size_t n_seeds,
                                           std::size_t k);

struct LatencySummary {
  std::string method;
  std::size_t count = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;

  nlohmann::json to_json() const;
};

constexpr std::size_t kMinLatencyInstances = 10;

// Wall-clock per explain call over every instance (seed 0). Needs at least
// kMinLatencyInstances instances.
LatencySummary latency_profile(const std::string& method, const ExplainFn& explain,
                               const std::vector<std::vector<double>>& instances);
LatencySummary summarize_latencies(const std::string& method, std::vector<double> samples_ms);

// Spearman rank correlation with average ranks for ties. Returns 0 when
// either input is constant.
double spearman_rho(std::span<const double> a, std::span<const double> b);

}  // namespace glassbox
