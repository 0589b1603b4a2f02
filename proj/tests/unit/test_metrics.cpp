#include <gtest/gtest.h>

#include <cmath>

#include "blackboxes.hpp"
#include "glassbox/error.hpp"
#include "glassbox/metrics.hpp"

using namespace glassbox;
using namespace glassbox::testing;

namespace {

Explanation expl(std::vector<double> a, std::optional<std::size_t> instance = 0,
                 std::string method = "m") {
  Explanation e;
  e.method = std::move(method);
  e.attributions = std::move(a);
  e.instance_id = instance;
  if (instance) e.target_class = 0;
  return e;
}

// Independent JS divergence in nats on |a| + eps normalized.
double js_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  auto normalize = [](const std::vector<double>& v) {
    std::vector<double> p(v.size());
    double t = 0;
    for (std::size_t i = 0; i < v.size(); ++i) t += p[i] = std::abs(v[i]) + 1e-12;
    for (double& x : p) x /= t;
    return p;
  };
  auto p = normalize(a), q = normalize(b);
  double js = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    js += 0.5 * p[i] * std::log(p[i] / m) + 0.5 * q[i] * std::log(q[i] / m);
  }
  return js;
}

}  // namespace

TEST(RankFeatures, AbsoluteOrderWithLowIndexTies) {
  auto e = expl({0.1, -0.5, 0.5, 0.0});
  EXPECT_EQ(rank_features(e), (std::vector<std::size_t>{1, 2, 0, 3}));
  EXPECT_EQ(top_k_features(e, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(RankAgreement, Examples) {
  // top-3 {1,2,3} vs {2,3,7}
  auto a = expl({0, 9, 8, 7, 0, 0, 0, 0});
  auto b = expl({0, 0, 9, 8, 0, 0, 0, 7});
  EXPECT_NEAR(rank_agreement(a, b, 3), 2.0 / 3.0, 1e-15);
  auto c = expl({1, 1, 0, 0});
  auto d = expl({0, 0, 1, 1});
  EXPECT_EQ(rank_agreement(c, d, 2), 0.0);
  EXPECT_THROW(rank_agreement(a, b, 0), ParameterError);
  EXPECT_THROW(rank_agreement(a, b, 9), ParameterError);
  EXPECT_THROW(rank_agreement(a, c, 1), DimensionError);
}

TEST(RankAgreement, SymmetricAndScaleInvariant) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> u(10), v(10);
    for (double& x : u) x = rng.normal();
    for (double& x : v) x = rng.normal();
    auto a = expl(u), b = expl(v);
    std::vector<double> scaled = u;
    for (double& x : scaled) x *= -3.5;
    for (std::size_t k = 1; k <= 10; ++k) {
      EXPECT_EQ(rank_agreement(a, b, k), rank_agreement(b, a, k));
      EXPECT_EQ(rank_agreement(a, expl(scaled), k), 1.0);
    }
  }
}

TEST(JsDistance, PointMassVersusUniform) {
  EXPECT_NEAR(js_distance(expl({1, 0}), expl({1, 1})), 0.2158, 1e-3);
  EXPECT_NEAR(js_distance(expl({1, 0}), expl({0, 1})), std::log(2.0), 1e-9);
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> u(6), v(6);
    for (double& x : u) x = rng.normal();
    for (double& x : v) x = rng.normal();
    const double js = js_distance(expl(u), expl(v));
    EXPECT_NEAR(js, js_oracle(u, v), 1e-12);
    EXPECT_GE(js, 0.0);
    EXPECT_LE(js, std::log(2.0) + 1e-12);
    EXPECT_NEAR(js, js_distance(expl(v), expl(u)), 1e-15);
  }
}

TEST(DisagreementMatrix, Structure) {
  auto a = expl({3, 2, 1, 0}, 0, "a");
  auto b = expl({0, 1, 2, 3}, 0, "b");
  auto g = expl({1, 1, 1, 1}, std::nullopt, "global");
  std::vector<Explanation> es = {a, b, g};
  auto m = disagreement_matrix(es, AgreementMetric::kRankAgreement, 2);
  EXPECT_EQ(m.methods, (std::vector<std::string>{"a", "b", "global"}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(m.values[i][i], 1.0);
  EXPECT_EQ(m.values[0][1], 0.0);
  EXPECT_EQ(m.values[0][1], m.values[1][0]);
  EXPECT_NEAR(m.mean_off_diagonal(), (0.0 + 1.0 + 0.0) / 3.0, 1e-15);  // g top-2 = {0,1}
  auto js = disagreement_matrix(es, AgreementMetric::kJsDistance);
  EXPECT_EQ(js.values[0][0], 0.0);
  EXPECT_FALSE(js.k.has_value());

  std::vector<Explanation> twins = {a, a};
  EXPECT_EQ(disagreement_matrix(twins, AgreementMetric::kRankAgreement, 2).mean_off_diagonal(), 1.0);
  std::vector<Explanation> mixed = {a, expl({1, 2, 3, 4}, 1, "c")};
  EXPECT_THROW(disagreement_matrix(mixed, AgreementMetric::kRankAgreement, 2), ValidationError);
  std::vector<Explanation> one = {a};
  EXPECT_THROW(disagreement_matrix(one, AgreementMetric::kRankAgreement, 2), ValidationError);
}

TEST(Consistency, PairsAndDeterministicMethods) {
  auto m = random_mlp(6, 2, 0);
  std::vector<double> x = {1, -1, 0.5, 0.2, -0.7, 0.3}, base(6, 0.0);
  ExplainerConfig c;
  c.method = "shapley_exact";
  auto r = consistency_across_seeds("shapley_exact", make_explainer(c, m.f, base), x, 2, 3);
  EXPECT_EQ(r.pairwise.size(), 1u);
  EXPECT_EQ(r.mean, 1.0);
  EXPECT_EQ(r.min, 1.0);
  EXPECT_EQ(r.variance(), 0.0);

  c.method = "lime";
  c.lime.n_samples = 8;
  auto lime = consistency_across_seeds("lime", make_explainer(c, m.f, base), x, 10, 3);
  EXPECT_EQ(lime.pairwise.size(), 45u);
  EXPECT_LT(lime.mean, 1.0);
  EXPECT_THROW(consistency_across_seeds("lime", make_explainer(c, m.f, base), x, 1, 3), ParameterError);
}

TEST(Latency, NeedsEnoughInstances) {
  auto m = random_mlp(3, 2, 0);
  ExplainerConfig c;
  c.method = "shapley_exact";
  auto fn = make_explainer(c, m.f, std::vector<double>(3, 0.0));
  std::vector<std::vector<double>> xs(9, std::vector<double>(3, 0.5));
  EXPECT_THROW(latency_profile("shapley_exact", fn, xs), ValidationError);
  xs.push_back(std::vector<double>(3, 0.1));
  auto s = latency_profile("shapley_exact", fn, xs);
  EXPECT_EQ(s.count, 10u);
  EXPECT_GE(s.p95_ms, s.median_ms);

  std::vector<double> samples = {5, 1, 4, 2, 3, 10, 6, 7, 8, 9};
  auto sum = summarize_latencies("x", samples);
  EXPECT_DOUBLE_EQ(sum.median_ms, 5.5);
}

TEST(PredictionGap, ZeroAndPlanted) {
  auto f = logistic({2.0, -1.5, 0.0, 0.0, 0.0});
  std::vector<double> x = {1.0, 0.8, -0.4, 2.0, 0.3}, base(5, 0.0);
  auto e = shapley_exact(f, x, base);
  EXPECT_EQ(prediction_gap(f, x, e, 0, GapDirection::kImportant, base), 0.0);
  const double pgu = prediction_gap(f, x, e, 3, GapDirection::kUnimportant, base);
  const double pgi = prediction_gap(f, x, e, 2, GapDirection::kImportant, base);
  EXPECT_LE(pgu, 0.05);
  EXPECT_GT(pgi, pgu);
  const double p = f(x)[1];
  EXPECT_NEAR(pgi, std::abs(p - 0.5), 1e-12);
  EXPECT_THROW(prediction_gap(f, x, e, 6, GapDirection::kImportant, base), ParameterError);
}

TEST(Spearman, Examples) {
  const std::vector<double> a = {1, 2, 3, 4}, b = {10, 20, 30, 40}, c = {4, 3, 2, 1};
  EXPECT_NEAR(spearman_rho(a, b), 1.0, 1e-15);
  EXPECT_NEAR(spearman_rho(a, c), -1.0, 1e-15);
  const std::vector<double> flat = {1, 1, 1, 1};
  EXPECT_EQ(spearman_rho(a, flat), 0.0);
  const std::vector<double> ties = {1, 2, 2, 3};
  // average ranks 1, 2.5, 2.5, 4 against 1..4
  EXPECT_NEAR(spearman_rho(a, ties), 4.5 / std::sqrt(5.0 * 4.5), 1e-12);
}
