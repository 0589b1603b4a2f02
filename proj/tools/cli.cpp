#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "glassbox/checkpoint.hpp"
#include "glassbox/data.hpp"
#include "glassbox/error.hpp"
#include "glassbox/explainers.hpp"
#include "glassbox/feature_gating.hpp"
#include "glassbox/i2md.hpp"
#include "glassbox/interpretcc.hpp"
#include "glassbox/metrics.hpp"
#include "glassbox/training.hpp"
#include "glassbox/version.hpp"

namespace glassbox::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Bad flag combinations detected after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Failure to write an artifact; a runtime failure, not a config problem.
class OutputError : public Error {
 public:
  using Error::Error;
};

std::string short_hash(const json& j) {
  const std::string text = j.dump();
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()))
      .substr(0, 12);
}

json artifact_header(const std::string& command, const json& run_config) {
  return {{"tool", "glassbox"},
          {"tool_version", kVersion},
          {"command", command},
          {"run_config", run_config},
          {"run_fingerprint", short_hash(run_config)}};
}

fs::path resolve_run_dir(const std::string& out, const std::string& command, const json& run_config) {
  fs::path dir;
  if (!out.empty()) {
    dir = out;
  } else {
    const char* root = std::getenv(kOutputRootEnv);
    dir = fs::path(root && *root ? root : "runs") / (command + "-" + short_hash(run_config));
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw OutputError("cannot write " + path.string());
  file << text;
  if (!file) throw OutputError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

// ---- data sources ----------------------------------------------------------

struct DataOptions {
  std::string source = "synthetic:switch_moe";
  std::string label = "label";
  std::string category;
  std::size_t rows = 2000;
  std::size_t features = 12;
  std::size_t blocks = 3;
  double noise = 0.0;
  std::optional<std::uint64_t> data_seed;
  double train_fraction = 0.8;

  void add_to(CLI::App& app) {
    app.add_option("--data", source, "synthetic:<planted_linear|switch_moe|multi_skill> or a CSV path")
        ->capture_default_str();
    app.add_option("--label", label, "label column of CSV inputs")->capture_default_str();
    app.add_option("--category", category, "probe category column of CSV inputs");
    app.add_option("--rows", rows, "synthetic rows")->capture_default_str();
    app.add_option("--features", features, "synthetic feature count")->capture_default_str();
    app.add_option("--blocks", blocks, "synthetic feature blocks")->capture_default_str();
    app.add_option("--noise", noise, "synthetic label noise std")->capture_default_str();
    app.add_option("--data-seed", data_seed, "synthetic generator seed (default: --seed)");
    app.add_option("--train-fraction", train_fraction, "train share of the stratified split")
        ->capture_default_str();
  }

  bool synthetic() const { return source.rfind("synthetic:", 0) == 0; }

  json to_json(std::uint64_t seed) const {
    json j = {{"source", source}, {"train_fraction", train_fraction}};
    if (synthetic()) {
      j["synthetic"] = synthetic_spec(seed).to_json();
    } else {
      j["label"] = label;
      if (!category.empty()) j["category"] = category;
      j["sha256"] = file_digest(source);
    }
    return j;
  }

  SyntheticSpec synthetic_spec(std::uint64_t seed) const {
    SyntheticSpec spec;
    spec.kind = synthetic_kind_from_string(source.substr(std::string("synthetic:").size()));
    spec.num_features = features;
    spec.num_groups = blocks;
    spec.n_samples = rows;
    spec.noise_std = noise;
    spec.seed = data_seed.value_or(seed);
    return spec;
  }

  Dataset load(std::uint64_t seed) const {
    if (synthetic()) return gen_synthetic(synthetic_spec(seed));
    return load_csv(source, label, category.empty() ? std::nullopt : std::optional(category));
  }
};

struct Prepared {
  Dataset raw_train;
  Dataset raw_test;
  Dataset train;
  Dataset test;
  Standardization stats;
};

Prepared prepare(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("--train-fraction must lie strictly between 0 and 1");
  }
  Prepared p;
  std::tie(p.raw_train, p.raw_test) = split(data, {train_fraction, 1.0 - train_fraction}, seed, false);
  p.stats = fit_standardization(p.raw_train);
  p.train = apply_standardization(p.raw_train, p.stats);
  p.test = apply_standardization(p.raw_test, p.stats);
  return p;
}

// Instance files are labeled CSVs as written by `train`; a "category" column
// is recognized and kept out of the features.
Dataset load_instances(const fs::path& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open instances file " + path.string());
  std::string header;
  std::getline(in, header);
  std::optional<std::string> category;
  std::stringstream cells(header);
  for (std::string cell; std::getline(cells, cell, ',');) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    if (cell == "category") category = cell;
  }
  return load_csv(path, label, category);
}

// ---- checkpoints -----------------------------------------------------------

struct LoadedModel {
  Checkpoint checkpoint;
  std::unique_ptr<Model> model;
  std::optional<Standardization> stats;

  const GatedModel* gated() const { return dynamic_cast<const GatedModel*>(model.get()); }

  Dataset standardize(const Dataset& raw) const {
    if (raw.num_features != model->num_features()) {
      throw DimensionError("instances have " + std::to_string(raw.num_features) +
                           " features, checkpoint " + checkpoint.id.substr(0, 12) + " expects " +
                           std::to_string(model->num_features()));
    }
    return stats ? apply_standardization(raw, *stats) : raw;
  }
};

LoadedModel load_model(const fs::path& path) {
  LoadedModel m;
  m.checkpoint = read_checkpoint_file(path);
  m.model = restore(m.checkpoint);
  if (m.checkpoint.fingerprint.contains("standardization")) {
    m.stats = Standardization::from_json(m.checkpoint.fingerprint["standardization"]);
  }
  return m;
}

std::unique_ptr<Model> build_for(const std::string& kind, const Dataset& train,
                                 const std::optional<FeatureGroupSpec>& groups,
                                 const std::vector<std::size_t>& hidden, const GateConfig& gate,
                                 Rng& rng) {
  if (kind == MlpClassifier::kKind) {
    MlpConfig c{train.num_features, hidden.empty() ? std::vector<std::size_t>{32, 32} : hidden,
                train.num_classes, Activation::kRelu};
    return std::make_unique<MlpClassifier>(c, rng);
  }
  if (kind == InterpretCCModel::kKind) {
    if (!groups) throw UsageError("interpretcc_moe needs --groups (no default grouping for this data)");
    InterpretCCConfig c;
    c.groups = *groups;
    c.num_classes = train.num_classes;
    if (!hidden.empty()) c.discriminator_hidden = hidden;
    c.gate = gate;
    return std::make_unique<InterpretCCModel>(c, rng);
  }
  if (kind == FeatureGatingModel::kKind) {
    FeatureGatingConfig c;
    c.num_features = train.num_features;
    c.num_classes = train.num_classes;
    if (!hidden.empty()) c.gate_hidden = hidden;
    c.gate = gate;
    c.feature_names = train.feature_names;
    return std::make_unique<FeatureGatingModel>(c, rng);
  }
  throw UsageError("unknown model kind '" + kind +
                   "' (valid: mlp_blackbox, feature_gating, interpretcc_moe)");
}

struct GateOptions {
  double lambda = 0.0;
  std::size_t top_k = 0;
  double temperature_start = 5.0;
  double temperature_end = 0.5;
  double anneal = 0.95;

  void add_to(CLI::App& app) {
    app.add_option("--lambda", lambda, "sparsity coefficient")->capture_default_str();
    app.add_option("--top-k", top_k, "keep the k highest-scoring units (0: threshold 0.5)")
        ->capture_default_str();
    app.add_option("--temperature-start", temperature_start)->capture_default_str();
    app.add_option("--temperature-end", temperature_end)->capture_default_str();
    app.add_option("--anneal", anneal, "per-epoch temperature decay")->capture_default_str();
  }

  GateConfig config() const {
    GateConfig g;
    g.sparsity_coefficient = lambda;
    g.temperature_start = temperature_start;
    g.temperature_end = temperature_end;
    g.anneal_rate = anneal;
    g.selection = top_k == 0 ? SelectionMode::threshold() : SelectionMode::top_k(top_k);
    return g;
  }
};

std::optional<FeatureGroupSpec> resolve_groups(const std::string& path, const Dataset& data) {
  if (path.empty()) return data.default_groups;
  FeatureGroupSpec spec = FeatureGroupSpec::load(path);
  if (spec.num_features() != data.num_features) {
    throw ValidationError(path + ": groups cover " + std::to_string(spec.num_features()) +
                          " features, data has " + std::to_string(data.num_features));
  }
  return spec;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  DataOptions data;
  GateOptions gate;
  std::string model = InterpretCCModel::kKind;
  std::string groups;
  std::vector<std::size_t> hidden;
  std::size_t epochs = 30;
  double learning_rate = 1e-2;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const Dataset data = a.data.load(a.seed);
  Prepared p = prepare(data, a.data.train_fraction, a.seed);
  const auto groups = resolve_groups(a.groups, data);
  const GateConfig gate = a.gate.config();

  json run_config = {{"model", a.model},
                     {"data", a.data.to_json(a.seed)},
                     {"hidden", a.hidden},
                     {"epochs", a.epochs},
                     {"learning_rate", a.learning_rate},
                     {"batch_size", a.batch_size},
                     {"seed", a.seed},
                     {"gate", gate.to_json()}};
  if (groups) run_config["groups"] = groups->to_json();

  Rng rng(a.seed);
  auto model = build_for(a.model, p.train, groups, a.hidden, gate, rng);
  TrainOptions options{a.batch_size, a.learning_rate, OptimizerKind::kAdam};
  TrainingTrace trace;
  double active = 0.0;
  if (auto* gated = dynamic_cast<GatedModel*>(model.get())) {
    trace = train(*gated, p.train, a.epochs, gate, rng, options);
    active = mean_active_units(*gated, p.test);
  } else {
    trace = fit_classifier(dynamic_cast<MlpClassifier&>(*model), p.train, a.epochs, rng, options);
  }

  const fs::path dir = resolve_run_dir(a.out, "train", run_config);
  const std::uint64_t steps_per_epoch = (p.train.num_rows + a.batch_size - 1) / a.batch_size;
  json fingerprint = artifact_header("train", run_config);
  fingerprint["standardization"] = p.stats.to_json();
  fingerprint["feature_names"] = p.train.feature_names;
  Checkpoint ckpt = make_checkpoint(*model, a.epochs * steps_per_epoch, fingerprint);
  try {
    write_checkpoint_file(ckpt, dir / "model.ckpt");
  } catch (const IoError& e) {
    throw OutputError(e.what());
  }

  json trace_doc = artifact_header("train", run_config);
  trace_doc["checkpoint_id"] = ckpt.id;
  trace_doc["trace"] = trace.to_json();
  write_json(dir / "trace.json", trace_doc);

  json summary = artifact_header("train", run_config);
  summary["checkpoint_id"] = ckpt.id;
  summary["train_accuracy"] = accuracy(*model, p.train);
  summary["test_accuracy"] = accuracy(*model, p.test);
  if (dynamic_cast<GatedModel*>(model.get())) summary["test_mean_active"] = active;
  write_json(dir / "run.json", summary);
  write_csv(p.raw_train, dir / "train.csv");
  write_csv(p.raw_test, dir / "test.csv");

  out << "checkpoint " << (dir / "model.ckpt").string() << "\n"
      << "checkpoint_id " << ckpt.id << "\n"
      << "test_accuracy " << summary["test_accuracy"].get<double>() << "\n";
  return kSuccess;
}

// ---- explainers over a checkpoint ------------------------------------------

struct ExplainerOptions {
  std::size_t n_permutations = 1000;
  std::size_t lime_samples = 1000;
  std::size_t permutation_repeats = 5;

  void add_to(CLI::App& app) {
    app.add_option("--n-permutations", n_permutations, "shapley_sampled permutations")
        ->capture_default_str();
    app.add_option("--lime-samples", lime_samples, "LIME perturbations")->capture_default_str();
    app.add_option("--permutation-repeats", permutation_repeats)->capture_default_str();
  }

  ExplainerConfig config(const std::string& method) const {
    ExplainerConfig c;
    c.method = method;
    c.n_permutations = n_permutations;
    c.lime.n_samples = lime_samples;
    c.permutation.repeats = permutation_repeats;
    return c;
  }

  json to_json() const {
    return {{"n_permutations", n_permutations},
            {"lime_samples", lime_samples},
            {"permutation_repeats", permutation_repeats}};
  }
};

// One explained model as seen from a row of standardized instances.
struct Subject {
  BlackBox f;
  std::vector<double> baseline;
  const GatedModel* intrinsic = nullptr;
  const Dataset* reference = nullptr;
};

void check_method(const std::string& method) {
  const auto& valid = explainer_methods();
  if (std::find(valid.begin(), valid.end(), method) == valid.end()) {
    std::string list;
    for (const auto& m : valid) list += (list.empty() ? "" : ", ") + m;
    throw UsageError("unknown explanation method '" + method + "' (valid: " + list + ")");
  }
}

// ---- explain ---------------------------------------------------------------

struct ExplainArgs {
  std::string checkpoint;
  std::string instances;
  std::string method;
  std::string label = "label";
  ExplainerOptions explainer;
  std::uint64_t seed = 0;
  std::size_t limit = 0;
  bool stable_output = false;
  std::string output;
  std::string out;
};

int cmd_explain(const ExplainArgs& a, std::ostream& out) {
  check_method(a.method);
  LoadedModel m = load_model(a.checkpoint);
  const Dataset instances = m.standardize(load_instances(a.instances, a.label));
  const std::size_t n = a.limit == 0 ? instances.num_rows : std::min(a.limit, instances.num_rows);

  BlackBox f = BlackBox::from_model(*m.model);
  if (a.method == "interpretcc" && !m.gated()) {
    throw UsageError("method 'interpretcc' needs a gated checkpoint (interpretcc_moe or "
                     "feature_gating); " + a.checkpoint + " holds " + m.model->kind());
  }
  ExplainFn explain = make_explainer(a.explainer.config(a.method), f,
                                     std::vector<double>(f.num_features, 0.0), &instances, m.gated());

  const json run_config = {{"checkpoint_id", m.checkpoint.id},
                           {"instances_sha256", file_digest(a.instances)},
                           {"method", a.method},
                           {"seed", a.seed},
                           {"limit", a.limit},
                           {"explainer", a.explainer.to_json()}};
  json records = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    Explanation e = explain(instances.row(i), a.seed);
    e.checkpoint_id = m.checkpoint.id;
    if (e.target_class) e.instance_id = i;
    records.push_back(to_json(e, a.stable_output ? LatencyField::kOmit : LatencyField::kInclude));
  }
  json doc = artifact_header("explain", run_config);
  doc["explanations"] = records;

  if (a.output == "-") {
    out << doc.dump(2) << "\n";
    return kSuccess;
  }
  const fs::path path = a.output.empty() ? resolve_run_dir(a.out, "explain", run_config) / "explanations.json"
                                         : fs::path(a.output);
  write_json(path, doc);
  out << "wrote " << n << " explanations to " << path.string() << "\n";
  return kSuccess;
}

std::size_t instances_dim(const LoadedModel& m) { return m.model->num_features(); }

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  std::string checkpoint;
  std::string intrinsic_checkpoint;
  std::string instances;
  std::string label = "label";
  std::vector<std::string> methods;
  ExplainerOptions explainer;
  std::size_t n_instances = 50;
  std::size_t consistency_seeds = 10;
  std::size_t consistency_instances = 10;
  std::vector<std::size_t> ks{3, 5};
  std::size_t gap_k = 3;
  std::uint64_t seed = 0;
  std::string out;
};

struct MatrixSum {
  std::vector<std::string> methods;
  std::vector<std::vector<double>> sum;
  std::size_t count = 0;

  void add(const DisagreementMatrix& m) {
    if (count == 0) {
      methods = m.methods;
      sum.assign(m.values.size(), std::vector<double>(m.values.size(), 0.0));
    }
    for (std::size_t i = 0; i < sum.size(); ++i)
      for (std::size_t j = 0; j < sum.size(); ++j) sum[i][j] += m.values[i][j];
    ++count;
  }

  DisagreementMatrix mean(const std::string& metric, std::optional<std::size_t> k) const {
    DisagreementMatrix out;
    out.methods = methods;
    out.metric_name = metric;
    out.k = k;
    out.values = sum;
    for (auto& row : out.values)
      for (double& v : row) v /= static_cast<double>(count);
    return out;
  }
};

std::string csv_number(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  LoadedModel main = load_model(a.checkpoint);
  std::optional<LoadedModel> side;
  if (!a.intrinsic_checkpoint.empty()) {
    side = load_model(a.intrinsic_checkpoint);
    if (!side->gated()) {
      throw UsageError(a.intrinsic_checkpoint + " is not a gated checkpoint (holds " +
                       side->model->kind() + ")");
    }
  }
  const LoadedModel* intrinsic_owner = main.gated() ? &main : (side ? &*side : nullptr);

  std::vector<std::string> methods = a.methods;
  if (methods.empty()) {
    methods = {"lime", "shapley_sampled", "permutation"};
    if (intrinsic_owner) methods.push_back("interpretcc");
  }
  for (const auto& m : methods) check_method(m);
  if (methods.size() < 2) throw UsageError("bench needs at least two methods, got " +
                                           std::to_string(methods.size()));
  if (a.ks.empty() || a.gap_k == 0) throw UsageError("--k and --gap-k must be positive");
  for (std::size_t k : a.ks) {
    if (k == 0 || k > instances_dim(main)) {
      throw UsageError("--k values must lie in [1, " + std::to_string(instances_dim(main)) + "]");
    }
  }
  const std::size_t consistency_k = a.ks.back();

  const Dataset raw = load_instances(a.instances, a.label);
  const Dataset instances = main.standardize(raw);
  const std::size_t n = std::min(a.n_instances, instances.num_rows);
  if (n == 0) throw ValidationError(a.instances + ": no instances");

  Subject black{BlackBox::from_model(*main.model), std::vector<double>(instances.num_features, 0.0),
                main.gated(), &instances};
  std::optional<Dataset> side_instances;
  std::optional<Subject> gated_subject;
  if (intrinsic_owner == &main) {
    gated_subject = black;
  } else if (side) {
    side_instances = side->standardize(raw);
    gated_subject = Subject{BlackBox::from_model(*side->model),
                            std::vector<double>(instances.num_features, 0.0), side->gated(),
                            &*side_instances};
  }

  // Each method explains its own subject; the intrinsic method sees the
  // instance as standardized for its own checkpoint.
  struct Bound {
    std::string method;
    const Subject* subject;
    const Dataset* rows;
    ExplainFn fn;
  };
  std::vector<Bound> bound;
  for (const auto& m : methods) {
    const bool intrinsic = m == "interpretcc";
    if (intrinsic && !gated_subject) {
      throw UsageError("method 'interpretcc' needs a gated checkpoint; pass --intrinsic-checkpoint");
    }
    const Subject& s = intrinsic ? *gated_subject : black;
    const Dataset* rows = intrinsic && side_instances ? &*side_instances : &instances;
    bound.push_back({m, &s, rows,
                     make_explainer(a.explainer.config(m), s.f, s.baseline, s.reference, s.intrinsic)});
  }

  json run_config = {{"checkpoint_id", main.checkpoint.id},
                     {"instances_sha256", file_digest(a.instances)},
                     {"methods", methods},
                     {"n_instances", n},
                     {"consistency_seeds", a.consistency_seeds},
                     {"consistency_instances", a.consistency_instances},
                     {"k", a.ks},
                     {"gap_k", a.gap_k},
                     {"seed", a.seed},
                     {"explainer", a.explainer.to_json()}};
  if (side) run_config["intrinsic_checkpoint_id"] = side->checkpoint.id;

  std::vector<MatrixSum> rank_sum(a.ks.size());
  MatrixSum js_sum;
  json per_instance = json::array();
  std::vector<double> pgi(bound.size(), 0.0), pgu(bound.size(), 0.0);
  std::vector<std::size_t> pgi_wins(bound.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Explanation> row;
    for (std::size_t b = 0; b < bound.size(); ++b) {
      auto x = bound[b].rows->row(i);
      Explanation e = bound[b].fn(x, a.seed);
      if (e.target_class) e.instance_id = i;
      const double gi = prediction_gap(bound[b].subject->f, x, e, a.gap_k, GapDirection::kImportant,
                                       bound[b].subject->baseline);
      const double gu = prediction_gap(bound[b].subject->f, x, e, a.gap_k,
                                       GapDirection::kUnimportant, bound[b].subject->baseline);
      pgi[b] += gi;
      pgu[b] += gu;
      if (gi >= gu) ++pgi_wins[b];
      row.push_back(std::move(e));
    }
    json cell = {{"instance_id", i}};
    for (std::size_t q = 0; q < a.ks.size(); ++q) {
      const auto m = disagreement_matrix(row, AgreementMetric::kRankAgreement, a.ks[q]);
      rank_sum[q].add(m);
      cell["rank_agreement_top" + std::to_string(a.ks[q])] = m.values;
    }
    const auto m = disagreement_matrix(row, AgreementMetric::kJsDistance);
    js_sum.add(m);
    cell["js_distance"] = m.values;
    per_instance.push_back(std::move(cell));
  }
  std::vector<DisagreementMatrix> ranks;
  for (std::size_t q = 0; q < a.ks.size(); ++q) {
    ranks.push_back(rank_sum[q].mean(to_string(AgreementMetric::kRankAgreement), a.ks[q]));
  }
  const DisagreementMatrix js = js_sum.mean(to_string(AgreementMetric::kJsDistance), std::nullopt);

  std::vector<ConsistencyReport> consistency;
  const std::size_t n_consistency = std::min(a.consistency_instances, n);
  for (const auto& b : bound) {
    ConsistencyReport pooled;
    pooled.method = b.method;
    pooled.n_seeds = a.consistency_seeds;
    pooled.k = consistency_k;
    for (std::size_t i = 0; i < n_consistency; ++i) {
      const auto r = consistency_across_seeds(b.method, b.fn, b.rows->row(i), a.consistency_seeds,
                                              consistency_k);
      pooled.pairwise.insert(pooled.pairwise.end(), r.pairwise.begin(), r.pairwise.end());
    }
    if (!pooled.pairwise.empty()) {
      double total = 0.0;
      for (double v : pooled.pairwise) total += v;
      pooled.mean = total / static_cast<double>(pooled.pairwise.size());
      pooled.min = *std::min_element(pooled.pairwise.begin(), pooled.pairwise.end());
    }
    consistency.push_back(std::move(pooled));
  }

  std::vector<LatencySummary> latency;
  {
    std::vector<double> samples;
    for (std::size_t i = 0; i < n; ++i) {
      const auto start = std::chrono::steady_clock::now();
      auto p = main.model->predict_proba(instances.row(i));
      samples.push_back(
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
      if (p.empty()) throw ContractError("model returned no probabilities");
    }
    latency.push_back(summarize_latencies("model_forward", samples));
  }
  for (const auto& b : bound) {
    std::vector<std::vector<double>> xs;
    for (std::size_t i = 0; i < n; ++i) xs.emplace_back(b.rows->row(i).begin(), b.rows->row(i).end());
    latency.push_back(latency_profile(b.method, b.fn, xs));
  }

  const fs::path dir = resolve_run_dir(a.out, "bench", run_config);
  json report = artifact_header("bench", run_config);
  report["dataset_id"] = fs::path(a.instances).filename().string() + "@" +
                         run_config["instances_sha256"].get<std::string>().substr(0, 12);
  report["model_checkpoint_id"] = main.checkpoint.id;
  json aggregates = json::array();
  for (const auto& r : ranks) {
    json j = r.to_json();
    j["mean_off_diagonal"] = r.mean_off_diagonal();
    aggregates.push_back(j);
  }
  json js_j = js.to_json();
  js_j["mean_off_diagonal"] = js.mean_off_diagonal();
  aggregates.push_back(js_j);
  report["disagreement"] = aggregates;
  report["per_instance"] = per_instance;
  json cons = json::array();
  for (const auto& c : consistency) {
    json j = c.to_json();
    j["variance"] = c.variance();
    cons.push_back(j);
  }
  report["consistency"] = cons;
  json lat = json::array();
  for (const auto& l : latency) lat.push_back(l.to_json());
  report["latency"] = lat;
  json fid = json::array();
  for (std::size_t b = 0; b < bound.size(); ++b) {
    fid.push_back({{"method", bound[b].method},
                   {"k", a.gap_k},
                   {"mean_pgi", pgi[b] / static_cast<double>(n)},
                   {"mean_pgu", pgu[b] / static_cast<double>(n)},
                   {"pgi_ge_pgu_fraction", static_cast<double>(pgi_wins[b]) / static_cast<double>(n)}});
  }
  report["fidelity"] = fid;
  write_json(dir / "report.json", report);

  const std::string tag = short_hash(run_config);
  std::ostringstream dis;
  dis << "run_fingerprint,metric,k,method_a,method_b,value\n";
  std::vector<const DisagreementMatrix*> all;
  for (const auto& r : ranks) all.push_back(&r);
  all.push_back(&js);
  for (const auto* m : all)
    for (std::size_t i = 0; i < m->methods.size(); ++i)
      for (std::size_t j = 0; j < m->methods.size(); ++j)
        dis << tag << ',' << m->metric_name << ',' << (m->k ? std::to_string(*m->k) : "") << ','
            << m->methods[i] << ',' << m->methods[j] << ',' << csv_number(m->values[i][j]) << '\n';
  write_text(dir / "disagreement.csv", dis.str());

  std::ostringstream cc;
  cc << "run_fingerprint,method,n_seeds,k,mean,min,variance\n";
  for (const auto& c : consistency)
    cc << tag << ',' << c.method << ',' << c.n_seeds << ',' << c.k << ',' << csv_number(c.mean) << ','
       << csv_number(c.min) << ',' << csv_number(c.variance()) << '\n';
  write_text(dir / "consistency.csv", cc.str());

  std::ostringstream lc;
  lc << "run_fingerprint,method,count,median_ms,p95_ms\n";
  for (const auto& l : latency)
    lc << tag << ',' << l.method << ',' << l.count << ',' << csv_number(l.median_ms) << ','
       << csv_number(l.p95_ms) << '\n';
  write_text(dir / "latency.csv", lc.str());

  std::ostringstream fc;
  fc << "run_fingerprint,method,k,mean_pgi,mean_pgu,pgi_ge_pgu_fraction\n";
  for (const auto& row : fid)
    fc << tag << ',' << row["method"].get<std::string>() << ',' << a.gap_k << ','
       << csv_number(row["mean_pgi"].get<double>()) << ',' << csv_number(row["mean_pgu"].get<double>())
       << ',' << csv_number(row["pgi_ge_pgu_fraction"].get<double>()) << '\n';
  write_text(dir / "fidelity.csv", fc.str());

  out << "report " << (dir / "report.json").string() << "\n";
  for (const auto& r : ranks) {
    out << "mean off-diagonal top-" << *r.k << " rank agreement " << r.mean_off_diagonal() << "\n";
  }
  for (const auto& l : latency) {
    out << "latency " << l.method << " median_ms " << l.median_ms << " p95_ms " << l.p95_ms << "\n";
  }
  return kSuccess;
}

// ---- diagnose --------------------------------------------------------------

struct DiagnoseArgs {
  DataOptions data;
  GateOptions gate;
  std::string model = MlpClassifier::kKind;
  std::string groups;
  std::vector<std::size_t> hidden{16};
  std::vector<std::string> probes;
  DiagnosticsConfig diagnostics;
  std::string optimizer = "adam";
  std::string out;
};

int cmd_diagnose(DiagnoseArgs a, std::ostream& out) {
  if (a.optimizer != "adam" && a.optimizer != "sgd") {
    throw UsageError("--optimizer must be adam or sgd");
  }
  a.diagnostics.optimizer = a.optimizer == "adam" ? OptimizerKind::kAdam : OptimizerKind::kSgd;
  a.diagnostics.validate();
  const std::uint64_t seed = a.diagnostics.seed;
  const Dataset data = a.data.load(seed);
  Prepared p = prepare(data, a.data.train_fraction, seed);

  std::vector<Probe> probes;
  json probe_sources = json::array();
  if (a.probes.empty()) {
    const ProbeSuite derived = ProbeSuite::from_categories(p.test);
    probes = derived.probes();
    probe_sources.push_back("held-out split by category");
  } else {
    for (const auto& path : a.probes) {
      Dataset raw = load_instances(path, a.data.label);
      if (raw.num_features != p.train.num_features) {
        throw DimensionError("probe '" + fs::path(path).stem().string() + "' (" + path + ") has " +
                             std::to_string(raw.num_features) + " features, model expects " +
                             std::to_string(p.train.num_features));
      }
      probes.push_back({fs::path(path).stem().string(), apply_standardization(raw, p.stats),
                        ProbeMetric::kAccuracy});
      probe_sources.push_back({{"name", probes.back().name}, {"sha256", file_digest(path)}});
    }
  }
  ProbeSuite suite(std::move(probes));

  const auto groups = resolve_groups(a.groups, data);
  const GateConfig gate = a.gate.config();
  json run_config = {{"model", a.model},
                     {"data", a.data.to_json(seed)},
                     {"hidden", a.hidden},
                     {"probes", probe_sources},
                     {"diagnostics", a.diagnostics.to_json()}};
  if (a.model != MlpClassifier::kKind) {
    run_config["gate"] = gate.to_json();
    if (groups) run_config["groups"] = groups->to_json();
  }

  Rng rng(seed);
  auto model = build_for(a.model, p.train, groups, a.hidden, gate, rng);
  const fs::path dir = resolve_run_dir(a.out, "diagnose", run_config);
  json fingerprint = artifact_header("diagnose", run_config);
  fingerprint["standardization"] = p.stats.to_json();
  std::optional<CheckpointStore> store;
  try {
    store.emplace(dir / "checkpoints");
  } catch (const IoError& e) {
    throw OutputError(e.what());
  }
  DiagnosticsRun run = run_diagnostics(*model, p.train, suite, a.diagnostics, &*store, fingerprint);

  json reports = json::array();
  for (const auto& r : run.reports) reports.push_back(r.to_json(LatencyField::kOmit));
  json deltas = json::array();
  for (const auto& d : run.deltas) deltas.push_back(d.to_json());

  json timeline = artifact_header("diagnose", run_config);
  timeline["timeline"] = run.timeline.to_json();
  timeline["resample_step"] = run.resample_step ? json(*run.resample_step) : json(nullptr);
  write_json(dir / "timeline.json", timeline);
  json report_doc = artifact_header("diagnose", run_config);
  report_doc["reports"] = reports;
  write_json(dir / "reports.json", report_doc);
  json delta_doc = artifact_header("diagnose", run_config);
  delta_doc["deltas"] = deltas;
  write_json(dir / "deltas.json", delta_doc);
  std::istringstream rows(run.timeline.to_csv());
  std::ostringstream csv;
  const std::string tag = short_hash(run_config);
  bool header = true;
  for (std::string line; std::getline(rows, line); header = false) {
    csv << (header ? std::string("run_fingerprint") : tag) << ',' << line << '\n';
  }
  write_text(dir / "timeline.csv", csv.str());

  out << "timeline " << (dir / "timeline.json").string() << "\n";
  const Timeline& t = run.timeline;
  for (std::size_t i = 0; i < t.probes.size(); ++i) {
    out << "probe " << t.probes[i] << " final " << t.scores[i].back() << " acquired ";
    if (t.acquisition_step[i]) {
      out << "at step " << *t.acquisition_step[i] << "\n";
    } else {
      out << "never\n";
    }
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"glassbox: interpretable-by-design models, post-hoc explainers and diagnostics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint and trace");
  train_args.data.add_to(*train_cmd);
  train_args.gate.add_to(*train_cmd);
  train_cmd->add_option("--model", train_args.model, "mlp_blackbox | feature_gating | interpretcc_moe")
      ->capture_default_str();
  train_cmd->add_option("--groups", train_args.groups, "feature group JSON file");
  train_cmd->add_option("--hidden", train_args.hidden, "hidden widths (comma separated)")->delimiter(',');
  train_cmd->add_option("--epochs", train_args.epochs)->capture_default_str();
  train_cmd->add_option("--lr", train_args.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch-size", train_args.batch_size)->capture_default_str();
  train_cmd->add_option("--seed", train_args.seed)->capture_default_str();
  train_cmd->add_option("--out", train_args.out, "run directory");

  ExplainArgs explain_args;
  auto* explain_cmd = app.add_subcommand("explain", "explain instances with one method");
  explain_cmd->add_option("--checkpoint", explain_args.checkpoint)->required();
  explain_cmd->add_option("--instances", explain_args.instances, "labeled CSV")->required();
  explain_cmd->add_option("--method", explain_args.method)->required();
  explain_cmd->add_option("--label", explain_args.label)->capture_default_str();
  explain_args.explainer.add_to(*explain_cmd);
  explain_cmd->add_option("--seed", explain_args.seed)->capture_default_str();
  explain_cmd->add_option("--limit", explain_args.limit, "explain the first N rows (0: all)");
  explain_cmd->add_flag("--stable-output", explain_args.stable_output,
                        "write latency as null so output is byte-reproducible");
  explain_cmd->add_option("--output", explain_args.output, "output file, '-' for stdout");
  explain_cmd->add_option("--out", explain_args.out, "run directory");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "explainer disagreement, consistency, latency, fidelity");
  bench_cmd->add_option("--checkpoint", bench_args.checkpoint)->required();
  bench_cmd->add_option("--intrinsic-checkpoint", bench_args.intrinsic_checkpoint,
                        "gated checkpoint used for the interpretcc method");
  bench_cmd->add_option("--instances", bench_args.instances, "labeled CSV")->required();
  bench_cmd->add_option("--label", bench_args.label)->capture_default_str();
  bench_cmd->add_option("--methods", bench_args.methods, "comma separated")->delimiter(',');
  bench_args.explainer.add_to(*bench_cmd);
  bench_cmd->add_option("--n-instances", bench_args.n_instances)->capture_default_str();
  bench_cmd->add_option("--consistency-seeds", bench_args.consistency_seeds)->capture_default_str();
  bench_cmd->add_option("--consistency-instances", bench_args.consistency_instances)
      ->capture_default_str();
  bench_cmd->add_option("--k", bench_args.ks, "top-k values for rank agreement (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--gap-k", bench_args.gap_k, "features removed for PGI/PGU")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed)->capture_default_str();
  bench_cmd->add_option("--out", bench_args.out, "run directory");

  DiagnoseArgs diag_args;
  diag_args.data.source = "synthetic:multi_skill";
  auto* diag_cmd = app.add_subcommand("diagnose", "snapshot training and track probe skills over time");
  diag_args.data.add_to(*diag_cmd);
  diag_args.gate.add_to(*diag_cmd);
  diag_cmd->add_option("--model", diag_args.model)->capture_default_str();
  diag_cmd->add_option("--groups", diag_args.groups, "feature group JSON file");
  diag_cmd->add_option("--hidden", diag_args.hidden)->delimiter(',')->capture_default_str();
  diag_cmd->add_option("--probes", diag_args.probes, "probe CSV files (comma separated)")
      ->delimiter(',');
  diag_cmd->add_option("--steps", diag_args.diagnostics.total_steps)->capture_default_str();
  diag_cmd->add_option("--cadence", diag_args.diagnostics.cadence, "steps between snapshots")
      ->capture_default_str();
  diag_cmd->add_option("--batch-size", diag_args.diagnostics.batch_size)->capture_default_str();
  diag_cmd->add_option("--lr", diag_args.diagnostics.learning_rate)->capture_default_str();
  diag_cmd->add_option("--optimizer", diag_args.optimizer)->capture_default_str();
  diag_cmd->add_option("--resample-boost", diag_args.diagnostics.resample_boost,
                       "upweight failing categories after the midpoint snapshot (1: off)")
      ->capture_default_str();
  diag_cmd->add_option("--skill-threshold", diag_args.diagnostics.skill_threshold)
      ->capture_default_str();
  diag_cmd->add_option("--stability-band", diag_args.diagnostics.stability_band)
      ->capture_default_str();
  diag_cmd->add_option("--seed", diag_args.diagnostics.seed)->capture_default_str();
  diag_cmd->add_option("--out", diag_args.out, "run directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out);
    if (*explain_cmd) return cmd_explain(explain_args, out);
    if (*bench_cmd) return cmd_bench(bench_args, out);
    if (*diag_cmd) return cmd_diagnose(diag_args, out);
  } catch (const OutputError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const ContractError& e) {
    err << "internal error: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const Error& e) {
    // Validation, parameter, dimension and input errors: the configuration is at fault.
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace glassbox::cli
