#include "glassbox/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "glassbox/error.hpp"

namespace glassbox {
namespace {

constexpr double kJsEpsilon = 1e-12;

void require_same_dimension(const Explanation& a, const Explanation& b, const char* who) {
  if (a.num_features() != b.num_features()) {
    throw DimensionError(std::string(who) + ": explanations have " +
                         std::to_string(a.num_features()) + " and " +
                         std::to_string(b.num_features()) + " features");
  }
}

std::vector<double> to_distribution(const Explanation& e) {
  std::vector<double> p(e.attributions.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::abs(e.attributions[i]) + kJsEpsilon;
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::vector<std::size_t> rank_features(const Explanation& e) {
  std::vector<std::size_t> order(e.attributions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(e.attributions[a]) > std::abs(e.attributions[b]);
  });
  return order;
}

std::vector<std::size_t> top_k_features(const Explanation& e, std::size_t k) {
  if (k > e.num_features()) {
    throw ParameterError("k = " + std::to_string(k) + " exceeds " +
                         std::to_string(e.num_features()) + " features");
  }
  std::vector<std::size_t> order = rank_features(e);
  order.resize(k);
  return order;
}

double prediction_gap(const BlackBox& f, std::span<const double> x, const Explanation& e,
                      std::size_t k, GapDirection direction, std::span<const double> baseline) {
  if (x.size() != e.num_features() || baseline.size() != e.num_features()) {
    throw DimensionError("prediction_gap: input, baseline and explanation lengths differ");
  }
  if (k > e.num_features()) throw ParameterError("prediction_gap: k exceeds feature count");
  if (k == 0) return 0.0;
  std::vector<std::size_t> order = rank_features(e);
  std::vector<double> imputed(x.begin(), x.end());
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t j =
        direction == GapDirection::kImportant ? order[r] : order[order.size() - 1 - r];
    imputed[j] = baseline[j];
  }
  const std::vector<double> original = f(x);
  const std::size_t target = e.target_class.value_or(argmax(original));
  if (target >= original.size()) throw IndexError("prediction_gap: target class out of range");
  return std::abs(original[target] - f(imputed)[target]);
}

double rank_agreement(const Explanation& e1, const Explanation& e2, std::size_t k) {
  require_same_dimension(e1, e2, "rank_agreement");
  if (k == 0 || k > e1.num_features()) {
    throw ParameterError("rank_agreement needs 1 <= k <= " + std::to_string(e1.num_features()));
  }
  std::vector<std::size_t> a = top_k_features(e1, k), b = top_k_features(e2, k);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(k);
}

double js_distance(const Explanation& e1, const Explanation& e2) {
  require_same_dimension(e1, e2, "js_distance");
  const std::vector<double> p = to_distribution(e1), q = to_distribution(e2);
  double kl_p = 0.0, kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    kl_p += p[i] * std::log(p[i] / m);
    kl_q += q[i] * std::log(q[i] / m);
  }
  // Clamp rounding noise into the analytic range [0, ln 2].
  return std::clamp(0.5 * (kl_p + kl_q), 0.0, std::log(2.0));
}

std::string to_string(AgreementMetric metric) {
  return metric == AgreementMetric::kRankAgreement ? "rank_agreement" : "js_distance";
}

double DisagreementMatrix::mean_off_diagonal() const {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) total += values[i][j];
  return total / static_cast<double>(n * (n - 1));
}

nlohmann::json DisagreementMatrix::to_json() const {
  return {{"metric", metric_name},
          {"k", k ? nlohmann::json(*k) : nlohmann::json(nullptr)},
          {"methods", methods},
          {"values", values},
          {"mean_off_diagonal", mean_off_diagonal()}};
}

DisagreementMatrix disagreement_matrix(std::span<const Explanation> explanations,
                                       AgreementMetric metric, std::size_t k) {
  if (explanations.size() < 2) {
    throw ValidationError("disagreement_matrix needs at least two explanations");
  }
  std::optional<std::size_t> instance;
  for (const auto& e : explanations) {
    require_same_dimension(e, explanations[0], "disagreement_matrix");
    if (!e.instance_id) continue;
    if (instance && *instance != *e.instance_id) {
      throw ValidationError("disagreement_matrix: explanations are for different instances (" +
                            std::to_string(*instance) + " vs " +
                            std::to_string(*e.instance_id) + ")");
    }
    instance = e.instance_id;
  }
  const std::size_t n = explanations.size();
  DisagreementMatrix out;
  out.metric_name = to_string(metric);
  if (metric == AgreementMetric::kRankAgreement) out.k = k;
  out.values.assign(n, std::vector<double>(n, 0.0));
  for (const auto& e : explanations) out.methods.push_back(e.method);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i][i] = metric == AgreementMetric::kRankAgreement ? 1.0 : 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = metric == AgreementMetric::kRankAgreement
                           ? rank_agreement(explanations[i], explanations[j], k)
                           : js_distance(explanations[i], explanations[j]);
      out.values[i][j] = out.values[j][i] = v;
    }
  }
  return out;
}

double ConsistencyReport::variance() const {
  if (pairwise.empty()) return 0.0;
  double sq = 0.0;
  for (double v : pairwise) sq += (v - mean) * (v - mean);
  return sq / static_cast<double>(pairwise.size());
}

nlohmann::json ConsistencyReport::to_json() const {
  return {{"method", method}, {"n_seeds", n_seeds}, {"k", k},         {"pairwise", pairwise},
          {"mean", mean},     {"min", min},         {"variance", variance()}};
}

ConsistencyReport consistency_across_seeds(const std::string& method, const ExplainFn& explain,
                                           std::span<const double> x, std::size_t n_seeds,
                                           std::size_t k) {
  if (n_seeds < 2) throw ParameterError("consistency_across_seeds needs n_seeds >= 2");
  std::vector<Explanation> runs;
  for (std::size_t s = 0; s < n_seeds; ++s) runs.push_back(explain(x, s));
  ConsistencyReport report;
  report.method = method;
  report.n_seeds = n_seeds;
  report.k = k;
  for (std::size_t i = 0; i < n_seeds; ++i)
    for (std::size_t j = i + 1; j < n_seeds; ++j)
      report.pairwise.push_back(rank_agreement(runs[i], runs[j], k));
  report.mean = std::accumulate(report.pairwise.begin(), report.pairwise.end(), 0.0) /
                static_cast<double>(report.pairwise.size());
  report.min = *std::min_element(report.pairwise.begin(), report.pairwise.end());
  return report;
}

nlohmann::json LatencySummary::to_json() const {
  return {{"method", method}, {"count", count}, {"median_ms", median_ms}, {"p95_ms", p95_ms}};
}

LatencySummary summarize_latencies(const std::string& method, std::vector<double> samples_ms) {
  if (samples_ms.size() < kMinLatencyInstances) {
    throw ValidationError("latency profile needs at least " +
                          std::to_string(kMinLatencyInstances) + " instances, got " +
                          std::to_string(samples_ms.size()));
  }
  std::sort(samples_ms.begin(), samples_ms.end());
  const std::size_t n = samples_ms.size();
  LatencySummary s;
  s.method = method;
  s.count = n;
  s.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

LatencySummary latency_profile(const std::string& method, const ExplainFn& explain,
                               const std::vector<std::vector<double>>& instances) {
  if (instances.size() < kMinLatencyInstances) {
    throw ValidationError("latency profile needs at least " +
                          std::to_string(kMinLatencyInstances) + " instances, got " +
                          std::to_string(instances.size()));
  }
  std::vector<double> samples;
  samples.reserve(instances.size());
  for (const auto& x : instances) {
    const auto start = std::chrono::steady_clock::now();
    Explanation e = explain(x, 0);
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  return summarize_latencies(method, std::move(samples));
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman_rho: length mismatch");
  if (a.size() < 2) return 0.0;
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace glassbox
