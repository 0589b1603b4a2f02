#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "glassbox/data.hpp"
#include "glassbox/error.hpp"
#include "glassbox/feature_gating.hpp"
#include "glassbox/interpretcc.hpp"
#include "glassbox/ops.hpp"
#include "glassbox/training.hpp"
#include "gradcheck.hpp"

using namespace glassbox;
using glassbox::testing::check_gradients;
using glassbox::testing::jitter;

namespace {

FeatureGroupSpec overlapping_groups() {
  return FeatureGroupSpec(6, {{"a", {0, 1, 2}}, {"b", {2, 3}}, {"c", {4, 5}}});
}

InterpretCCModel make_moe(std::uint64_t seed, GateConfig gate = {}) {
  InterpretCCConfig c;
  c.groups = overlapping_groups();
  c.num_classes = 3;
  c.gate = gate;
  Rng rng(seed);
  return InterpretCCModel(c, rng);
}

std::vector<double> random_x(Rng& rng, std::size_t d) {
  std::vector<double> x(d);
  for (double& v : x) v = rng.normal();
  return x;
}

// Two-feature data separable by x0 + x1 > 0 with a margin.
Dataset separable(std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.id = "separable";
  d.num_features = 2;
  d.num_classes = 2;
  d.feature_names = {"x0", "x1"};
  while (d.num_rows < 400) {
    const double a = rng.normal(), b = rng.normal();
    if (std::abs(a + b) < 0.2) continue;
    d.features.insert(d.features.end(), {a, b});
    d.labels.push_back(a + b > 0 ? 1 : 0);
    ++d.num_rows;
  }
  return d;
}

}  // namespace

TEST(HardMask, InferenceThreshold) {
  auto m = hard_mask(Tensor::vector({0.9, 0.1, 0.5}), 1.0, nullptr, MaskMode::kInferenceHard);
  EXPECT_EQ(m[0], 1.0);
  EXPECT_EQ(m[1], 0.0);
  EXPECT_EQ(m[2], 1.0);
}

TEST(HardMask, InferenceConsumesNoRandomness) {
  Rng a(9), b(9);
  hard_mask(Tensor::vector({0.3, 0.8}), 1.0, &a, MaskMode::kInferenceHard);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(HardMask, RejectsBadArguments) {
  Rng rng(0);
  EXPECT_THROW(hard_mask(Tensor::vector({0.5}), 0.0, &rng, MaskMode::kTrainSoft), ParameterError);
  EXPECT_THROW(hard_mask(Tensor::vector({0.5}), -1.0, &rng, MaskMode::kInferenceHard), ParameterError);
  EXPECT_THROW(hard_mask(Tensor::vector({1.0}), 1.0, &rng, MaskMode::kTrainSoft), DomainError);
}

TEST(HardMask, LowTemperatureForwardValueIsBernoulli) {
  Rng rng(2024);
  double total = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto m = hard_mask(Tensor::vector({0.7}), 0.01, &rng, MaskMode::kTrainSoft);
    ASSERT_TRUE(m[0] == 0.0 || m[0] == 1.0);
    total += m[0];
  }
  EXPECT_GE(total / n, 0.68);
  EXPECT_LE(total / n, 0.72);
}

TEST(HardMask, TrainSoftBackwardUsesRelaxedSample) {
  // Same noise drawn for both variants, so the gradients must coincide.
  auto p1 = Tensor::vector({0.3, 0.6}, true);
  auto p2 = Tensor::vector({0.3, 0.6}, true);
  Rng r1(5), r2(5);
  auto hard = hard_mask(p1, 0.7, &r1, MaskMode::kTrainSoft);
  auto soft = hard_mask(p2, 0.7, &r2, MaskMode::kTrainRelaxed);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE(hard[i] == 0.0 || hard[i] == 1.0);
  sum(hard).backward();
  sum(soft).backward();
  for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(p1.grad()[i], p2.grad()[i]);
}

TEST(SparsityPenalty, Examples) {
  const double any[] = {0.3, 0.9};
  EXPECT_EQ(sparsity_penalty(any, 0.0), 0.0);
  const double ones[] = {1, 1, 1};
  EXPECT_EQ(sparsity_penalty(ones, 1.0), 1.0);
  const double two[] = {0.2, 0.6};
  EXPECT_NEAR(sparsity_penalty(two, 0.5), 0.2, 1e-15);
  EXPECT_THROW(sparsity_penalty(two, -0.1), ParameterError);
  EXPECT_NEAR(sparsity_penalty(Tensor::vector({0.2, 0.6}), 0.5).item(), 0.2, 1e-15);
}

TEST(Selection, ThresholdFallbackAndTopK) {
  const double low[] = {0.1, 0.4, 0.3};
  EXPECT_EQ(select_active(low, SelectionMode::threshold()), (std::vector<bool>{false, true, false}));
  const double tie[] = {0.7, 0.9, 0.9, 0.2};
  EXPECT_EQ(select_active(tie, SelectionMode::top_k(2)), (std::vector<bool>{false, true, true, false}));
  EXPECT_EQ(select_active(tie, SelectionMode::top_k(1)), (std::vector<bool>{false, true, false, false}));
  EXPECT_EQ(select_active(tie, SelectionMode::top_k(4)), (std::vector<bool>(4, true)));
}

TEST(GateConfig, Validation) {
  GateConfig g;
  EXPECT_NO_THROW(g.validate(3));
  g.temperature_end = 6.0;
  EXPECT_THROW(g.validate(3), ParameterError);
  g = {};
  g.anneal_rate = 0.0;
  EXPECT_THROW(g.validate(3), ParameterError);
  g = {};
  g.selection = SelectionMode::top_k(4);
  EXPECT_THROW(g.validate(3), ParameterError);
  g = {};
  EXPECT_DOUBLE_EQ(g.temperature_at(0), 5.0);
  EXPECT_DOUBLE_EQ(g.temperature_at(1), 4.75);
  EXPECT_DOUBLE_EQ(g.temperature_at(1000), 0.5);
  EXPECT_EQ(GateConfig::from_json(g.to_json()), g);
}

TEST(FeatureGroups, Validation) {
  EXPECT_THROW(FeatureGroupSpec(3, {{"a", {0, 1}}}), ValidationError);           // 2 uncovered
  EXPECT_THROW(FeatureGroupSpec(3, {{"a", {0, 3}}, {"b", {1, 2}}}), ValidationError);
  EXPECT_THROW(FeatureGroupSpec(3, {{"a", {0, 1}}, {"a", {2}}}), ValidationError);
  EXPECT_THROW(FeatureGroupSpec(3, {{"a", {0, 1, 2}}, {"b", {}}}), ValidationError);
  EXPECT_NO_THROW(FeatureGroupSpec(3, {{"a", {0, 1}}, {"b", {1, 2}}}));  // overlap allowed
  auto c = FeatureGroupSpec::contiguous(7, 3);
  EXPECT_EQ(c.group(0).indices.size() + c.group(1).indices.size() + c.group(2).indices.size(), 7u);
}

TEST(FeatureGroups, ParseErrorsCarryLineNumbers) {
  const std::string text =
      "{\n"
      "  \"num_features\": 4,\n"
      "  \"groups\": [\n"
      "    {\"name\": \"a\", \"indices\": [0, 1]},\n"
      "    {\"name\": \"b\", \"indices\": [2, 9]}\n"
      "  ]\n"
      "}\n";
  try {
    FeatureGroupSpec::parse(text, "groups.json");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("groups.json:5:"), std::string::npos) << e.what();
  }
  try {
    FeatureGroupSpec::parse("{\n  \"num_features\": 2,\n  \"groups\": [\n", "broken.json");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.json"), std::string::npos) << e.what();
  }
  auto ok = FeatureGroupSpec::parse(
      R"({"num_features": 3, "groups": [{"name": "x", "indices": [0]}, {"name": "y", "indices": [1, 2]}]})");
  EXPECT_EQ(ok.num_groups(), 2u);
  EXPECT_EQ(FeatureGroupSpec::from_json(ok.to_json()), ok);
  EXPECT_THROW(FeatureGroupSpec::load("/nonexistent/groups.json"), IoError);
}

TEST(Route, FallbackTopKAndDeterminism) {
  GateConfig top_all;
  top_all.selection = SelectionMode::top_k(3);
  auto all = make_moe(1, top_all);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    auto x = random_x(rng, 6);
    EXPECT_EQ(all.route(x).num_active(), 3u);
  }
  auto model = make_moe(2);
  for (int i = 0; i < 200; ++i) {
    auto x = random_x(rng, 6);
    auto d1 = model.route(x);
    auto d2 = model.route(x);
    EXPECT_EQ(d1, d2);
    EXPECT_GE(d1.num_active(), 1u);
    bool any_above = false;
    for (double s : d1.scores) any_above = any_above || s >= 0.5;
    if (!any_above) EXPECT_EQ(d1.num_active(), 1u);
  }
  EXPECT_THROW(model.route(std::vector<double>(5, 0.0)), DimensionError);
}

TEST(Route, AllScoresLowActivatesArgmax) {
  auto model = make_moe(3);
  RoutingDecision d;
  d.scores = {0.1, 0.45, 0.2};
  d.active = select_active(d.scores, SelectionMode::threshold());
  EXPECT_EQ(d.active, (std::vector<bool>{false, true, false}));
}

TEST(PredictWithRouting, MaskingGuaranteeIsExact) {
  Rng rng(7);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto model = make_moe(seed);
    for (int trial = 0; trial < 100; ++trial) {
      auto x = random_x(rng, 6);
      RoutingDecision d = model.route(x);
      std::vector<bool> used(6, false);
      for (std::size_t g = 0; g < 3; ++g)
        if (d.active[g])
          for (auto f : model.groups().group(g).indices) used[f] = true;
      auto base = model.predict_with_routing(x, d);
      auto z = x;
      for (std::size_t f = 0; f < 6; ++f)
        if (!used[f]) z[f] += rng.normal(0.0, 100.0);
      EXPECT_EQ(model.predict_with_routing(z, d), base);
    }
  }
}

TEST(PredictWithRouting, SingleGroupIsThatExpertAlone) {
  auto model = make_moe(11);
  std::vector<double> x = {0.3, -1.0, 0.5, 2.0, -0.2, 0.8};
  RoutingDecision d;
  d.scores = {0.2, 0.9, 0.1};
  d.active = {false, true, false};
  auto expert = model.expert(1).forward_values(std::vector<double>{x[2], x[3]});
  softmax_inplace(expert);
  auto p = model.predict_with_routing(x, d);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(p[c], expert[c]);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);

  d.active = {false, false, false};
  EXPECT_THROW(model.predict_with_routing(x, d), ContractError);
}

TEST(Predict, EqualsComposition) {
  auto model = make_moe(5);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    auto x = random_x(rng, 6);
    auto p = model.predict(x);
    EXPECT_EQ(p.decision, model.route(x));
    EXPECT_EQ(p.probabilities, model.predict_with_routing(x, model.route(x)));
    EXPECT_GE(p.latency_ms, 0.0);
  }
}

TEST(Explain, AttributionFollowsActiveGroups) {
  auto model = make_moe(8);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    auto x = random_x(rng, 6);
    auto e = model.explain(x);
    auto d = model.route(x);
    EXPECT_EQ(e.method, "interpretcc");
    EXPECT_EQ(e.active_groups.size(), d.num_active());
    EXPECT_NEAR(std::accumulate(e.attributions.begin(), e.attributions.end(), 0.0), 1.0, 1e-12);
    std::vector<bool> used(6, false);
    for (std::size_t g = 0; g < 3; ++g)
      if (d.active[g])
        for (auto f : model.groups().group(g).indices) used[f] = true;
    for (std::size_t f = 0; f < 6; ++f)
      if (!used[f]) EXPECT_EQ(e.attributions[f], 0.0);
    if (d.num_active() == 1) {
      std::size_t g = 0;
      while (!d.active[g]) ++g;
      double mass = 0;
      for (auto f : model.groups().group(g).indices) mass += e.attributions[f];
      EXPECT_NEAR(mass, 1.0, 1e-12);
    }
  }
}

TEST(Experts, CannotSeeOtherGroupsOnTheTape) {
  auto model = make_moe(4);
  Rng rng(0);
  std::vector<double> xv(4 * 6);
  for (double& v : xv) v = rng.normal();
  for (std::size_t g = 0; g < 3; ++g) {
    auto x = Tensor::matrix(4, 6, xv, true);
    sum(model.expert_logits(g, x)).backward();
    const auto& idx = model.groups().group(g).indices;
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t f = 0; f < 6; ++f)
        if (std::find(idx.begin(), idx.end(), f) == idx.end()) EXPECT_EQ(x.grad()[r * 6 + f], 0.0);
  }
}

TEST(ForwardBatch, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto model = make_moe(seed);
    Rng data(seed + 100);
    jitter(model.parameters(), data);
    std::vector<double> xv(5 * 6);
    for (double& v : xv) v = data.normal();
    const auto x = Tensor::matrix(5, 6, xv);
    const std::vector<std::size_t> y = {0, 1, 2, 0, 1};
    for (MaskMode mode : {MaskMode::kTrainRelaxed, MaskMode::kInferenceHard}) {
      auto r = check_gradients(model.parameters(), [&] {
        Rng noise(seed);  // identical noise on every evaluation
        auto fwd = model.forward_batch(x, mode, 0.8, &noise);
        return add(cross_entropy_with_logits(fwd.logits, y), sparsity_penalty(fwd.scores, 0.3));
      });
      EXPECT_LE(r.max_rel_error, 1e-5) << "seed " << seed;
    }
  }
}

TEST(ForwardBatch, InferenceMatchesPerRowPrediction) {
  auto model = make_moe(6);
  Rng rng(2);
  std::vector<double> xv(8 * 6);
  for (double& v : xv) v = rng.normal();
  auto fwd = model.forward_batch(Tensor::matrix(8, 6, xv), MaskMode::kInferenceHard, 1.0, nullptr);
  for (std::size_t r = 0; r < 8; ++r) {
    std::vector<double> row(xv.begin() + r * 6, xv.begin() + (r + 1) * 6);
    std::vector<double> logits = {fwd.logits(r, 0), fwd.logits(r, 1), fwd.logits(r, 2)};
    softmax_inplace(logits);
    auto p = model.predict_proba(row);
    auto d = model.route(row);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(logits[c], p[c], 1e-12);
    for (std::size_t g = 0; g < 3; ++g) EXPECT_EQ(fwd.mask(r, g) == 1.0, d.active[g]);
  }
}

TEST(FeatureGating, MaskIsBinaryAndMaskedFeaturesAreIgnored) {
  FeatureGatingConfig c;
  c.num_features = 5;
  c.num_classes = 2;
  Rng init(1);
  FeatureGatingModel model(c, init);
  EXPECT_EQ(model.groups().num_groups(), 5u);
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = random_x(rng, 5);
    auto d = model.route(x);
    auto base = model.predict_with_routing(x, d);
    auto z = x;
    for (std::size_t f = 0; f < 5; ++f)
      if (!d.active[f]) z[f] = rng.normal(0.0, 50.0);
    EXPECT_EQ(model.predict_with_routing(z, d), base);
  }
  std::vector<double> xv(4 * 5);
  for (double& v : xv) v = rng.normal();
  auto fwd = model.forward_batch(Tensor::matrix(4, 5, xv), MaskMode::kInferenceHard, 1.0, nullptr);
  for (double m : fwd.mask.values()) EXPECT_TRUE(m == 0.0 || m == 1.0);
  Rng noise(3);
  auto soft = model.forward_batch(Tensor::matrix(4, 5, xv), MaskMode::kTrainSoft, 1.0, &noise);
  for (double m : soft.mask.values()) EXPECT_TRUE(m == 0.0 || m == 1.0);
}

TEST(FeatureGating, GradientsMatchFiniteDifferences) {
  FeatureGatingConfig c;
  c.num_features = 4;
  c.num_classes = 3;
  c.imputation = {0.1, -0.2, 0.0, 0.3};
  Rng init(2);
  FeatureGatingModel model(c, init);
  Rng data(5);
  jitter(model.parameters(), data);
  std::vector<double> xv(6 * 4);
  for (double& v : xv) v = data.normal();
  const auto x = Tensor::matrix(6, 4, xv);
  const std::vector<std::size_t> y = {0, 1, 2, 2, 1, 0};
  auto r = check_gradients(model.parameters(), [&] {
    Rng noise(1);
    return cross_entropy_with_logits(model.forward_batch(x, MaskMode::kTrainRelaxed, 0.9, &noise).logits, y);
  });
  EXPECT_LE(r.max_rel_error, 1e-5);
}

TEST(Train, ZeroEpochsLeavesModelUntouched) {
  auto model = make_moe(1);
  const auto before = parameter_values(model);
  Dataset d;
  d.num_features = 6;
  d.num_classes = 3;
  d.num_rows = 1;
  d.features.assign(6, 0.0);
  d.labels = {0};
  Rng rng(0);
  auto trace = train(model, d, 0, GateConfig{}, rng);
  EXPECT_TRUE(trace.epochs.empty());
  EXPECT_EQ(parameter_values(model), before);
}

TEST(Train, SeparableDataIsLearned) {
  const Dataset data = separable(0);
  InterpretCCConfig c;
  c.groups = FeatureGroupSpec(2, {{"x0", {0}}, {"x1", {1}}, {"both", {0, 1}}});
  c.num_classes = 2;
  Rng rng(0);
  InterpretCCModel moe(c, rng);
  auto trace = train(moe, data, 200, c.gate, rng);
  EXPECT_GE(trace.epochs.back().accuracy, 0.95);

  FeatureGatingConfig fc;
  fc.num_features = 2;
  fc.num_classes = 2;
  FeatureGatingModel gating(fc, rng);
  auto gtrace = train(gating, data, 200, fc.gate, rng);
  EXPECT_GE(gtrace.epochs.back().accuracy, 0.95);
}

TEST(Train, DeterministicGivenSeed) {
  const Dataset data = separable(1);
  auto run = [&] {
    InterpretCCConfig c;
    c.groups = FeatureGroupSpec(2, {{"x0", {0}}, {"x1", {1}}});
    Rng rng(3);
    InterpretCCModel m(c, rng);
    train(m, data, 5, c.gate, rng);
    return parameter_values(m);
  };
  EXPECT_EQ(run(), run());
}

TEST(Config, RoundTripsThroughJson) {
  auto model = make_moe(1);
  auto rebuilt = InterpretCCConfig::from_json(model.architecture());
  EXPECT_EQ(rebuilt.groups, model.groups());
  EXPECT_EQ(rebuilt.num_classes, 3u);
}
