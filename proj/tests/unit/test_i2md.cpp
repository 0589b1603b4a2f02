#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "glassbox/checkpoint.hpp"
#include "glassbox/error.hpp"
#include "glassbox/i2md.hpp"
#include "glassbox/training.hpp"
#include "tempdir.hpp"

using namespace glassbox;
using glassbox::testing::TempDir;

namespace {

std::unique_ptr<MlpClassifier> mlp(std::size_t d, std::uint64_t seed) {
  MlpConfig c;
  c.input_dim = d;
  c.hidden = {8};
  c.output_dim = 2;
  Rng rng(seed);
  return std::make_unique<MlpClassifier>(c, rng);
}

Dataset multi_skill(std::size_t n, std::uint64_t seed = 0) {
  SyntheticSpec s;
  s.kind = SyntheticKind::kMultiSkill;
  s.n_samples = n;
  s.num_features = 8;
  s.seed = seed;
  return gen_synthetic(s);
}

ProbeReport report(std::uint64_t step, std::vector<std::pair<std::string, double>> scores) {
  ProbeReport r;
  r.step = step;
  r.checkpoint_id = "ck" + std::to_string(step);
  for (auto& [name, s] : scores) r.scores.push_back({name, s, 10});
  return r;
}

}  // namespace

TEST(Checkpoint, ByteRoundTripAndContentId) {
  auto m = mlp(4, 1);
  auto ck = make_checkpoint(*m, 42, {{"run", "x"}});
  auto bytes = serialize(ck);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "GLSBXCKP");
  auto back = deserialize(bytes);
  EXPECT_EQ(back.id, sha256_hex(bytes));
  EXPECT_EQ(back.id, make_checkpoint(*m, 42, {{"run", "x"}}).id);
  EXPECT_EQ(back.step, 42u);
  EXPECT_EQ(back.parameters, ck.parameters);
  EXPECT_EQ(serialize(back), bytes);

  auto params = m->parameters();
  params[0].data()[0] = std::nextafter(params[0].data()[0], 1e9);
  EXPECT_NE(make_checkpoint(*m, 42, {{"run", "x"}}).id, back.id);
}

TEST(Checkpoint, Sha256KnownAnswer) {
  const std::string abc = "abc";
  EXPECT_EQ(sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(abc.data()), 3)),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Checkpoint, RestorePredictsIdentically) {
  auto m = mlp(5, 2);
  auto restored = restore(deserialize(serialize(make_checkpoint(*m, 0))));
  Rng rng(0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.normal();
    EXPECT_EQ(restored->predict_proba(x), m->predict_proba(x));
  }
}

TEST(Checkpoint, CorruptBytesAreRejected) {
  auto bytes = serialize(make_checkpoint(*mlp(3, 0), 1));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize(bad_magic), ValidationError);
  EXPECT_THROW(deserialize(std::span(bytes).first(bytes.size() - 3)), ValidationError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize(trailing), ValidationError);
}

TEST(CheckpointStore, IndexesAndVerifies) {
  TempDir dir;
  CheckpointStore store(dir / "ckpts");
  auto m = mlp(3, 0);
  auto a = store.snapshot(*m, 100);
  auto again = store.snapshot(*m, 100);
  EXPECT_EQ(a.id, again.id);
  auto b = store.snapshot(*mlp(3, 1), 0);
  EXPECT_EQ(store.index(), (std::vector<CheckpointIndexEntry>{{0, b.id}, {100, a.id}}));
  EXPECT_EQ(store.load(a.id).parameters, a.parameters);
  EXPECT_TRUE(std::filesystem::exists(store.path_for(a.id)));

  // Bytes that no longer hash to the file name.
  auto bytes = serialize(store.load(b.id));
  bytes[bytes.size() - 1] ^= 1;
  std::ofstream(store.path_for(b.id), std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  EXPECT_THROW(store.load(b.id), ValidationError);
  EXPECT_THROW(store.load("0000"), IoError);
}

TEST(ProbeSuite, Validation) {
  auto d = multi_skill(20);
  EXPECT_THROW(ProbeSuite({}), ValidationError);
  EXPECT_THROW(ProbeSuite({{"a", d}, {"a", d}}), ValidationError);
  EXPECT_THROW(ProbeSuite({{"", d}}), ValidationError);
  EXPECT_THROW(ProbeSuite({{"a", Dataset{}}}), ValidationError);
  auto s = ProbeSuite::from_categories(d);
  EXPECT_EQ(s.names(), (std::vector<std::string>{"easy", "hard"}));
  d.categories.clear();
  EXPECT_THROW(ProbeSuite::from_categories(d), ValidationError);
}

TEST(Evaluate, DeterministicAndByteStable) {
  auto d = multi_skill(100);
  auto suite = ProbeSuite::from_categories(d);
  auto m = mlp(8, 3);
  const auto first = evaluate_model(*m, suite, "id", 5).to_json(LatencyField::kOmit).dump();
  for (int i = 0; i < 10; ++i)
    EXPECT_EQ(evaluate_model(*m, suite, "id", 5).to_json(LatencyField::kOmit).dump(), first);
  auto r = evaluate_model(*m, suite, "id", 5);
  EXPECT_EQ(r.scores[0].n, 50u);
  EXPECT_EQ(ProbeReport::from_json(r.to_json()).scores, r.scores);
  EXPECT_THROW(r.score("missing"), IndexError);

  auto ck = make_checkpoint(*m, 7);
  auto snap = evaluate_snapshot(ck, suite);
  EXPECT_EQ(snap.checkpoint_id, ck.id);
  EXPECT_EQ(snap.step, 7u);
  EXPECT_EQ(snap.scores, r.scores);
}

TEST(Evaluate, SelfConsistencyAndChance) {
  auto d = multi_skill(200);
  auto m = mlp(8, 4);
  Dataset own = d;
  for (std::size_t i = 0; i < own.num_rows; ++i) own.labels[i] = argmax(m->predict_proba(own.row(i)));
  EXPECT_EQ(evaluate_model(*m, ProbeSuite({{"self", own}})).scores[0].score, 1.0);

  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    total += evaluate_model(*mlp(8, seed + 10), ProbeSuite({{"all", d}})).scores[0].score;
  EXPECT_NEAR(total / 10.0, 0.5, 0.1);

  EXPECT_THROW(evaluate_model(*mlp(3, 0), ProbeSuite({{"wide", d}})), DimensionError);
}

TEST(Diff, ClassifiesChanges) {
  auto a = report(100, {{"p", 0.5}, {"q", 0.9}, {"r", 0.7}});
  auto b = report(200, {{"p", 0.9}, {"q", 0.5}, {"r", 0.72}});
  auto d = diff_diagnostics(a, b);
  EXPECT_NEAR(d.probes[0].delta, 0.4, 1e-12);
  EXPECT_EQ(d.probes[0].change, SkillChange::kGained);
  EXPECT_EQ(d.probes[1].change, SkillChange::kLost);
  EXPECT_EQ(d.probes[2].change, SkillChange::kStable);
  auto back = diff_diagnostics(b, a);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.probes[i].delta, -d.probes[i].delta);
  EXPECT_EQ(to_string(SkillChange::kGained), "gained");

  EXPECT_THROW(diff_diagnostics(a, report(200, {{"p", 0.5}})), ValidationError);
  EXPECT_THROW(diff_diagnostics(a, report(200, {{"p", 0.5}, {"x", 0.9}, {"r", 0.7}})), ValidationError);
}

TEST(Resample, WeightsFollowFailingCategories) {
  auto d = multi_skill(100);
  auto r = report(0, {{"easy", 0.95}, {"hard", 0.6}});
  auto uniform = targeted_resample(d, r, 1.0);
  for (double w : uniform) EXPECT_DOUBLE_EQ(w, 0.01);
  auto boosted = targeted_resample(d, r, 4.0);
  double hard = 0.0, total = 0.0;
  for (std::size_t i = 0; i < d.num_rows; ++i) {
    total += boosted[i];
    if (d.categories[i] == "hard") hard += boosted[i];
    EXPECT_GT(boosted[i], 0.0);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(hard, 0.8, 1e-12);

  EXPECT_THROW(targeted_resample(d, r, 0.5), ParameterError);
  Dataset untagged = d;
  untagged.categories.clear();
  try {
    targeted_resample(untagged, r, 2.0);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("tag"), std::string::npos);
  }
}

TEST(Timeline, AcquisitionAndWarnings) {
  std::vector<ProbeReport> rs;
  const double easy[] = {0.5, 0.6, 0.7, 0.85, 0.9, 0.95};
  for (std::size_t i = 0; i < 6; ++i) rs.push_back(report(i * 100, {{"easy", easy[i]}, {"flat", 0.5}}));
  auto t = timeline_report(rs);
  EXPECT_EQ(t.acquisition_step[0], std::optional<std::uint64_t>(300));
  EXPECT_FALSE(t.acquisition_step[1].has_value());
  EXPECT_EQ(t.scores[1], std::vector<double>(6, 0.5));
  EXPECT_TRUE(t.to_json()["probes"][1]["acquisition_step"].is_null());
  EXPECT_EQ(t.to_csv().substr(0, 29), "step,checkpoint_id,probe,scor");

  std::swap(rs[0], rs[5]);
  std::stringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  auto sorted = timeline_report(rs);
  std::cerr.rdbuf(old);
  EXPECT_NE(captured.str().find("warning"), std::string::npos);
  EXPECT_EQ(sorted.steps, t.steps);
  EXPECT_EQ(sorted.scores, t.scores);
  EXPECT_THROW(timeline_report({rs[0]}), ValidationError);
}

TEST(Diagnostics, RunIsDeterministicAndSnapshotsOnCadence) {
  auto data = multi_skill(400, 1);
  auto [train, test] = split(data, {0.8, 0.2}, 0);
  auto suite = ProbeSuite::from_categories(test);
  DiagnosticsConfig c;
  c.total_steps = 250;
  c.cadence = 100;
  auto run = [&](double boost, CheckpointStore* store) {
    c.resample_boost = boost;
    auto m = mlp(8, 0);
    return run_diagnostics(*m, train, suite, c, store);
  };
  TempDir dir;
  CheckpointStore store(dir / "c");
  auto a = run(1.0, &store);
  EXPECT_EQ(a.timeline.steps, (std::vector<std::uint64_t>{0, 100, 200, 250}));
  EXPECT_EQ(a.deltas.size(), 3u);
  EXPECT_EQ(store.index().size(), 4u);
  EXPECT_FALSE(a.resample_step.has_value());
  auto b = run(1.0, nullptr);
  EXPECT_EQ(a.timeline.to_json(), b.timeline.to_json());
  auto boosted = run(3.0, nullptr);
  EXPECT_EQ(boosted.resample_step, std::optional<std::uint64_t>(200));

  DiagnosticsConfig bad;
  bad.cadence = 0;
  EXPECT_THROW(bad.validate(), ParameterError);
  EXPECT_EQ(DiagnosticsConfig::from_json(c.to_json()).to_json(), c.to_json());
}
