#include "glassbox/i2md.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "glassbox/error.hpp"
#include "glassbox/interpretcc.hpp"
#include "glassbox/ops.hpp"

namespace glassbox {

ProbeSuite::ProbeSuite(std::vector<Probe> probes) : probes_(std::move(probes)) {
  if (probes_.empty()) throw ValidationError("probe suite is empty");
  std::set<std::string> seen;
  for (const auto& p : probes_) {
    if (p.name.empty()) throw ValidationError("probe with empty name");
    if (!seen.insert(p.name).second) throw ValidationError("duplicate probe name '" + p.name + "'");
    if (p.data.num_rows == 0) throw ValidationError("probe '" + p.name + "' has no rows");
    p.data.validate();
  }
}

ProbeSuite ProbeSuite::from_categories(const Dataset& data) {
  if (!data.has_categories()) {
    throw ValidationError("dataset '" + data.id +
                          "' has no category tags; add a category column to derive probes");
  }
  std::vector<Probe> probes;
  for (const auto& name : data.category_names()) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.num_rows; ++i) {
      if (data.categories[i] == name) rows.push_back(i);
    }
    Probe p{name, data.subset(rows), ProbeMetric::kAccuracy};
    p.data.id = data.id + ":" + name;
    probes.push_back(std::move(p));
  }
  return ProbeSuite(std::move(probes));
}

std::vector<std::string> ProbeSuite::names() const {
  std::vector<std::string> out;
  for (const auto& p : probes_) out.push_back(p.name);
  return out;
}

double ProbeReport::score(const std::string& probe) const {
  for (const auto& s : scores) {
    if (s.probe == probe) return s.score;
  }
  throw IndexError("no probe named '" + probe + "' in report");
}

nlohmann::json ProbeReport::to_json(LatencyField latency) const {
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& s : scores) probes.push_back({{"probe", s.probe}, {"score", s.score}, {"n", s.n}});
  nlohmann::json j = {{"checkpoint_id", checkpoint_id}, {"step", step}, {"scores", probes}};
  j["wall_clock_ms"] = latency == LatencyField::kInclude ? nlohmann::json(wall_clock_ms) : nullptr;
  return j;
}

ProbeReport ProbeReport::from_json(const nlohmann::json& j) {
  ProbeReport r;
  r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  r.step = j.at("step").get<std::uint64_t>();
  for (const auto& s : j.at("scores")) {
    r.scores.push_back({s.at("probe").get<std::string>(), s.at("score").get<double>(),
                        s.at("n").get<std::size_t>()});
  }
  if (j.contains("wall_clock_ms") && !j["wall_clock_ms"].is_null()) {
    r.wall_clock_ms = j["wall_clock_ms"].get<double>();
  }
  return r;
}

ProbeReport evaluate_model(const Model& model, const ProbeSuite& suite,
                           const std::string& checkpoint_id, std::uint64_t step) {
  const auto start = std::chrono::steady_clock::now();
  ProbeReport report;
  report.checkpoint_id = checkpoint_id;
  report.step = step;
  for (const auto& probe : suite.probes()) {
    if (probe.data.num_features != model.num_features()) {
      throw DimensionError("probe '" + probe.name + "' has " +
                           std::to_string(probe.data.num_features) + " features, model expects " +
                           std::to_string(model.num_features()));
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < probe.data.num_rows; ++i) {
      if (argmax(model.predict_proba(probe.data.row(i))) == probe.data.labels[i]) ++correct;
    }
    report.scores.push_back({probe.name,
                             static_cast<double>(correct) / static_cast<double>(probe.data.num_rows),
                             probe.data.num_rows});
  }
  report.wall_clock_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ProbeReport evaluate_snapshot(const Checkpoint& checkpoint, const ProbeSuite& suite) {
  auto model = restore(checkpoint);
  return evaluate_model(*model, suite, checkpoint.id, checkpoint.step);
}

std::string to_string(SkillChange change) {
  switch (change) {
    case SkillChange::kGained: return "gained";
    case SkillChange::kLost: return "lost";
    case SkillChange::kStable: return "stable";
  }
  return "stable";
}

nlohmann::json DiagnosticDelta::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : probes) {
    rows.push_back({{"probe", p.probe}, {"delta", p.delta}, {"change", to_string(p.change)}});
  }
  return {{"from_step", from_step}, {"to_step", to_step}, {"stability_band", stability_band},
          {"probes", rows}};
}

DiagnosticDelta diff_diagnostics(const ProbeReport& from, const ProbeReport& to,
                                 double stability_band) {
  if (!(stability_band >= 0.0)) throw ParameterError("stability band must be non-negative");
  if (from.scores.size() != to.scores.size()) {
    throw ValidationError("reports cover different probe suites (" +
                          std::to_string(from.scores.size()) + " vs " +
                          std::to_string(to.scores.size()) + " probes)");
  }
  DiagnosticDelta d;
  d.from_step = from.step;
  d.to_step = to.step;
  d.stability_band = stability_band;
  for (std::size_t i = 0; i < from.scores.size(); ++i) {
    if (from.scores[i].probe != to.scores[i].probe) {
      throw ValidationError("reports cover different probe suites ('" + from.scores[i].probe +
                            "' vs '" + to.scores[i].probe + "')");
    }
    ProbeDelta p{from.scores[i].probe, to.scores[i].score - from.scores[i].score, SkillChange::kStable};
    if (p.delta > stability_band) {
      p.change = SkillChange::kGained;
    } else if (p.delta < -stability_band) {
      p.change = SkillChange::kLost;
    }
    d.probes.push_back(std::move(p));
  }
  return d;
}

std::vector<double> targeted_resample(const Dataset& train, const ProbeReport& report,
                                      double boost, double skill_threshold) {
  if (!(boost >= 1.0) || !std::isfinite(boost)) {
    throw ParameterError("boost factor must be a finite value >= 1");
  }
  if (train.num_rows == 0) throw ValidationError("training set is empty");
  if (!train.has_categories()) {
    throw ValidationError("training set '" + train.id +
                          "' has no category tags; tag each example with its probe category "
                          "(e.g. a category column) to enable targeted resampling");
  }
  std::map<std::string, bool> failing;
  for (const auto& s : report.scores) failing[s.probe] = s.score < skill_threshold;

  std::vector<double> weights(train.num_rows, 1.0);
  if (boost != 1.0) {
    for (std::size_t i = 0; i < train.num_rows; ++i) {
      auto it = failing.find(train.categories[i]);
      if (it != failing.end() && it->second) weights[i] = boost;
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return weights;
}

nlohmann::json Timeline::to_json() const {
  nlohmann::json series = nlohmann::json::array();
  for (std::size_t p = 0; p < probes.size(); ++p) {
    nlohmann::json acquired = nullptr;
    if (acquisition_step[p]) acquired = *acquisition_step[p];
    series.push_back({{"probe", probes[p]}, {"scores", scores[p]}, {"acquisition_step", acquired}});
  }
  return {{"skill_threshold", skill_threshold},
          {"steps", steps},
          {"checkpoint_ids", checkpoint_ids},
          {"probes", series}};
}

std::string Timeline::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "step,checkpoint_id,probe,score\n";
  for (std::size_t s = 0; s < steps.size(); ++s) {
    for (std::size_t p = 0; p < probes.size(); ++p) {
      out << steps[s] << ',' << checkpoint_ids[s] << ',' << probes[p] << ',' << scores[p][s] << '\n';
    }
  }
  return out.str();
}

Timeline timeline_report(std::vector<ProbeReport> reports, double skill_threshold) {
  if (reports.size() < 2) throw ValidationError("a timeline needs at least two reports");
  const auto by_step = [](const ProbeReport& a, const ProbeReport& b) { return a.step < b.step; };
  if (!std::is_sorted(reports.begin(), reports.end(), by_step)) {
    std::cerr << "warning: timeline reports were not sorted by step; sorting\n";
    std::stable_sort(reports.begin(), reports.end(), by_step);
  }
  Timeline t;
  t.skill_threshold = skill_threshold;
  for (const auto& s : reports.front().scores) t.probes.push_back(s.probe);
  t.scores.assign(t.probes.size(), {});
  t.acquisition_step.assign(t.probes.size(), std::nullopt);
  for (const auto& r : reports) {
    // Validates that every report covers the same suite.
    diff_diagnostics(reports.front(), r);
    t.steps.push_back(r.step);
    t.checkpoint_ids.push_back(r.checkpoint_id);
    for (std::size_t p = 0; p < t.probes.size(); ++p) {
      t.scores[p].push_back(r.scores[p].score);
      if (!t.acquisition_step[p] && r.scores[p].score >= skill_threshold) {
        t.acquisition_step[p] = r.step;
      }
    }
  }
  return t;
}

void DiagnosticsConfig::validate() const {
  if (total_steps == 0) throw ParameterError("total_steps must be positive");
  if (cadence == 0) throw ParameterError("snapshot cadence must be positive");
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(resample_boost >= 1.0)) throw ParameterError("resample boost must be >= 1");
  if (!(skill_threshold >= 0.0 && skill_threshold <= 1.0)) {
    throw ParameterError("skill threshold must lie in [0, 1]");
  }
  if (!(stability_band >= 0.0)) throw ParameterError("stability band must be non-negative");
}

nlohmann::json DiagnosticsConfig::to_json() const {
  return {{"total_steps", total_steps},
          {"cadence", cadence},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"optimizer", optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
          {"resample_boost", resample_boost},
          {"skill_threshold", skill_threshold},
          {"stability_band", stability_band},
          {"seed", seed}};
}

DiagnosticsConfig DiagnosticsConfig::from_json(const nlohmann::json& j) {
  DiagnosticsConfig c;
  c.total_steps = j.value("total_steps", c.total_steps);
  c.cadence = j.value("cadence", c.cadence);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  const std::string opt = j.value("optimizer", std::string("adam"));
  if (opt != "adam" && opt != "sgd") throw ValidationError("unknown optimizer '" + opt + "'");
  c.optimizer = opt == "adam" ? OptimizerKind::kAdam : OptimizerKind::kSgd;
  c.resample_boost = j.value("resample_boost", c.resample_boost);
  c.skill_threshold = j.value("skill_threshold", c.skill_threshold);
  c.stability_band = j.value("stability_band", c.stability_band);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

namespace {

std::vector<double> cumulative(const std::vector<double>& weights) {
  std::vector<double> c(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) c[i] = acc += weights[i];
  return c;
}

std::size_t draw(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

}  // namespace

DiagnosticsRun run_diagnostics(Model& model, const Dataset& train, const ProbeSuite& suite,
                               const DiagnosticsConfig& config, CheckpointStore* store,
                               const nlohmann::json& fingerprint) {
  config.validate();
  train.validate();
  if (train.num_features != model.num_features()) {
    throw DimensionError("training set has " + std::to_string(train.num_features) +
                         " features, model expects " + std::to_string(model.num_features()));
  }
  for (const auto& probe : suite.probes()) {
    if (probe.data.num_features != model.num_features()) {
      throw DimensionError("probe '" + probe.name + "' has " +
                           std::to_string(probe.data.num_features) + " features, model expects " +
                           std::to_string(model.num_features()));
    }
  }
  if (config.resample_boost != 1.0 && !train.has_categories()) {
    throw ValidationError("targeted resampling needs category tags on the training set");
  }

  auto* mlp = dynamic_cast<MlpClassifier*>(&model);
  auto* gated = dynamic_cast<GatedModel*>(&model);
  if (!mlp && !gated) throw ContractError("diagnostics cannot train model kind " + model.kind());

  Rng rng(config.seed);
  std::vector<Tensor> params = model.parameters();
  OptimizerState opt = config.optimizer == OptimizerKind::kAdam
                           ? OptimizerState::adam(config.learning_rate)
                           : OptimizerState::sgd(config.learning_rate);

  DiagnosticsRun run;
  run.final_weights.assign(train.num_rows, 1.0 / static_cast<double>(train.num_rows));
  std::vector<double> cdf = cumulative(run.final_weights);
  const std::size_t midpoint = (config.total_steps / 2 + config.cadence - 1) / config.cadence * config.cadence;

  nlohmann::json meta = fingerprint;
  meta["diagnostics"] = config.to_json();

  const auto take_snapshot = [&](std::size_t step) {
    Checkpoint c = make_checkpoint(model, step, meta);
    if (store) store->put(c);
    run.reports.push_back(evaluate_snapshot(c, suite));
    if (run.reports.size() > 1) {
      run.deltas.push_back(diff_diagnostics(run.reports[run.reports.size() - 2], run.reports.back(),
                                            config.stability_band));
    }
    if (config.resample_boost != 1.0 && !run.resample_step && step >= midpoint) {
      run.final_weights = targeted_resample(train, run.reports.back(), config.resample_boost,
                                            config.skill_threshold);
      cdf = cumulative(run.final_weights);
      run.resample_step = step;
    }
  };

  take_snapshot(0);
  std::vector<std::size_t> rows(config.batch_size);
  std::vector<std::size_t> labels(config.batch_size);
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      rows[b] = draw(cdf, rng);
      labels[b] = train.labels[rows[b]];
    }
    Tensor x = train.batch(rows);
    Tensor objective;
    if (mlp) {
      objective = cross_entropy_with_logits(mlp->logits(x), labels);
    } else {
      const GateConfig& gate = gated->gate_config();
      const auto epoch = (step - 1) * config.batch_size / train.num_rows;
      GatedForward fwd =
          gated->forward_batch(x, MaskMode::kTrainSoft, gate.temperature_at(epoch), &rng);
      objective = cross_entropy_with_logits(fwd.logits, labels);
      if (gate.sparsity_coefficient > 0.0) {
        objective = add(objective, sparsity_penalty(fwd.scores, gate.sparsity_coefficient));
      }
    }
    objective.backward();
    optimizer_step(opt, params);
    if (step % config.cadence == 0 || step == config.total_steps) take_snapshot(step);
  }
  run.timeline = timeline_report(run.reports, config.skill_threshold);
  return run;
}

}  // namespace glassbox
