#include "glassbox/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "glassbox/error.hpp"
#include "glassbox/rng.hpp"

namespace glassbox {
namespace {

constexpr double kConstantColumnStd = 1e-12;
constexpr double kEasyMargin = 0.75;  // multi_skill easy rule: |w.x|/|w| >= this
constexpr double kHardMargin = 0.25;  // multi_skill hard rule: |w.x|/|w| <= this

std::vector<std::string> default_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

// Contiguous blocks over features [first, d).
std::vector<std::vector<std::size_t>> blocks(std::size_t first, std::size_t d, std::size_t count) {
  std::vector<std::vector<std::size_t>> out;
  const std::size_t n = d - first;
  std::size_t start = first;
  for (std::size_t b = 0; b < count; ++b) {
    const std::size_t size = n / count + (b < n % count ? 1 : 0);
    std::vector<std::size_t> block(size);
    std::iota(block.begin(), block.end(), start);
    start += size;
    out.push_back(std::move(block));
  }
  return out;
}

// Rule weights with magnitudes in [0.5, 1.5] and random signs.
std::vector<double> rule_weights(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (double& v : w) {
    const double magnitude = rng.uniform(0.5, 1.5);
    v = rng.uniform() < 0.5 ? -magnitude : magnitude;
  }
  return w;
}

double dot(std::span<const double> x, const std::vector<std::size_t>& idx,
           const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) s += w[k] * x[idx[k]];
  return s;
}

double norm(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return std::sqrt(s);
}

struct SwitchRules {
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<double> weights_a, weights_b;
};

SwitchRules switch_rules(const SyntheticSpec& spec) {
  SwitchRules r;
  r.blocks = blocks(kSwitchFeature + 1, spec.num_features, spec.num_groups);
  Rng rule_rng(spec.seed ^ 0x5eed5eedULL);
  r.weights_a = rule_weights(rule_rng, r.blocks[0].size());
  r.weights_b = rule_weights(rule_rng, r.blocks[1].size());
  return r;
}

std::size_t to_label(double logit) { return logit > 0.0 ? 1 : 0; }

}  // namespace

std::vector<double> Standardization::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) {
    throw DimensionError("standardization fitted on " + std::to_string(mean.size()) +
                         " features, row has " + std::to_string(row.size()));
  }
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / stddev[j];
  return out;
}

nlohmann::json Standardization::to_json() const {
  return {{"mean", mean}, {"stddev", stddev}, {"constant_column", constant_column}};
}

Standardization Standardization::from_json(const nlohmann::json& j) {
  Standardization s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  s.constant_column = j.value("constant_column", std::vector<bool>(s.mean.size(), false));
  if (s.stddev.size() != s.mean.size() || s.constant_column.size() != s.mean.size()) {
    throw ValidationError("standardization record has mismatched lengths");
  }
  return s;
}

Tensor Dataset::batch(std::span<const std::size_t> rows) const {
  std::vector<double> values;
  values.reserve(rows.size() * num_features);
  for (std::size_t r : rows) {
    if (r >= num_rows) throw IndexError("row " + std::to_string(r) + " out of range");
    auto x = row(r);
    values.insert(values.end(), x.begin(), x.end());
  }
  return Tensor::matrix(rows.size(), num_features, std::move(values));
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.id = id;
  out.num_rows = rows.size();
  out.num_features = num_features;
  out.num_classes = num_classes;
  out.feature_names = feature_names;
  out.label_name = label_name;
  out.standardization = standardization;
  out.default_groups = default_groups;
  out.features.reserve(rows.size() * num_features);
  for (std::size_t r : rows) {
    if (r >= num_rows) throw IndexError("row " + std::to_string(r) + " out of range");
    auto x = row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    out.labels.push_back(labels[r]);
    if (!relevant_group.empty()) out.relevant_group.push_back(relevant_group[r]);
    if (!categories.empty()) out.categories.push_back(categories[r]);
  }
  return out;
}

void Dataset::validate() const {
  if (features.size() != num_rows * num_features) {
    throw ValidationError("dataset '" + id + "': feature matrix size does not match rows x features");
  }
  if (labels.size() != num_rows) throw ValidationError("dataset '" + id + "': label count mismatch");
  if (!relevant_group.empty() && relevant_group.size() != num_rows) {
    throw ValidationError("dataset '" + id + "': relevant-group tag count mismatch");
  }
  if (!categories.empty() && categories.size() != num_rows) {
    throw ValidationError("dataset '" + id + "': category tag count mismatch");
  }
  if (!feature_names.empty() && feature_names.size() != num_features) {
    throw ValidationError("dataset '" + id + "': feature name count mismatch");
  }
  for (std::size_t y : labels) {
    if (y >= num_classes) {
      throw ValidationError("dataset '" + id + "': label " + std::to_string(y) +
                            " out of range for " + std::to_string(num_classes) + " classes");
    }
  }
}

std::vector<std::string> Dataset::category_names() const {
  std::set<std::string> names(categories.begin(), categories.end());
  return {names.begin(), names.end()};
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kPlantedLinear: return "planted_linear";
    case SyntheticKind::kSwitchMoe: return "switch_moe";
    case SyntheticKind::kMultiSkill: return "multi_skill";
  }
  return "unknown";
}

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "planted_linear") return SyntheticKind::kPlantedLinear;
  if (name == "switch_moe") return SyntheticKind::kSwitchMoe;
  if (name == "multi_skill") return SyntheticKind::kMultiSkill;
  throw ValidationError("unknown synthetic dataset kind '" + name +
                        "' (expected planted_linear, switch_moe or multi_skill)");
}

void SyntheticSpec::validate() const {
  if (num_features == 0 || num_groups == 0 || n_samples == 0) {
    throw ParameterError("synthetic spec sizes must be positive");
  }
  if (!(noise_std >= 0.0)) throw ParameterError("noise_std must be non-negative");
  if (kind == SyntheticKind::kPlantedLinear && num_groups > num_features) {
    throw ParameterError("planted_linear needs num_groups <= num_features");
  }
  if (kind != SyntheticKind::kPlantedLinear) {
    const std::size_t needed = kind == SyntheticKind::kSwitchMoe ? num_groups : 2;
    if (kind == SyntheticKind::kSwitchMoe && num_groups < 2) {
      throw ParameterError("switch_moe needs at least two groups");
    }
    if (num_features < needed + 1) {
      throw ParameterError(to_string(kind) + " needs at least " + std::to_string(needed + 1) +
                           " features");
    }
  }
}

nlohmann::json SyntheticSpec::to_json() const {
  return {{"kind", to_string(kind)},     {"num_features", num_features},
          {"num_groups", num_groups},    {"n_samples", n_samples},
          {"noise_std", noise_std},      {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.kind = synthetic_kind_from_string(j.value("kind", to_string(s.kind)));
  s.num_features = j.value("num_features", s.num_features);
  s.num_groups = j.value("num_groups", s.num_groups);
  s.n_samples = j.value("n_samples", s.n_samples);
  s.noise_std = j.value("noise_std", s.noise_std);
  s.seed = j.value("seed", s.seed);
  return s;
}

double switch_moe_generator(const SyntheticSpec& spec, std::span<const double> x) {
  if (spec.kind != SyntheticKind::kSwitchMoe) {
    throw ParameterError("switch_moe_generator called for a " + to_string(spec.kind) + " spec");
  }
  if (x.size() != spec.num_features) throw DimensionError("switch_moe_generator: wrong input length");
  const SwitchRules rules = switch_rules(spec);
  const double s = x[kSwitchFeature];
  return std::max(s, 0.0) * dot(x, rules.blocks[0], rules.weights_a) +
         std::max(-s, 0.0) * dot(x, rules.blocks[1], rules.weights_b);
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.num_features;
  const std::size_t n = spec.n_samples;
  Dataset data;
  data.id = "synthetic:" + to_string(spec.kind) + ":d=" + std::to_string(d) +
            ":n=" + std::to_string(n) + ":seed=" + std::to_string(spec.seed);
  data.num_rows = n;
  data.num_features = d;
  data.num_classes = 2;
  data.feature_names = default_names(d);
  data.features.resize(n * d);
  data.labels.resize(n);
  data.relevant_group.resize(n);
  Rng rng(spec.seed);

  switch (spec.kind) {
    case SyntheticKind::kPlantedLinear: {
      FeatureGroupSpec groups = FeatureGroupSpec::contiguous(d, spec.num_groups);
      const auto& support = groups.group(0).indices;
      Rng rule_rng(spec.seed ^ 0x5eed5eedULL);
      const std::vector<double> w = rule_weights(rule_rng, support.size());
      for (std::size_t i = 0; i < n; ++i) {
        double* x = &data.features[i * d];
        for (std::size_t j = 0; j < d; ++j) x[j] = rng.normal();
        const double noise = spec.noise_std > 0 ? spec.noise_std * rng.normal() : 0.0;
        data.labels[i] = to_label(dot(data.row(i), support, w) + noise);
        data.relevant_group[i] = 0;
      }
      data.default_groups = std::move(groups);
      break;
    }
    case SyntheticKind::kSwitchMoe: {
      const SwitchRules rules = switch_rules(spec);
      for (std::size_t i = 0; i < n; ++i) {
        double* x = &data.features[i * d];
        for (std::size_t j = 0; j < d; ++j) x[j] = rng.normal();
        const double noise = spec.noise_std > 0 ? spec.noise_std * rng.normal() : 0.0;
        const bool use_a = x[kSwitchFeature] > 0.0;
        const double rule = use_a ? dot(data.row(i), rules.blocks[0], rules.weights_a)
                                  : dot(data.row(i), rules.blocks[1], rules.weights_b);
        data.labels[i] = to_label(rule + noise);
        data.relevant_group[i] = use_a ? 0 : 1;
      }
      std::vector<FeatureGroup> groups;
      for (std::size_t b = 0; b < rules.blocks.size(); ++b) {
        FeatureGroup g;
        g.name = b == 0 ? "rule_a" : b == 1 ? "rule_b" : "noise_" + std::to_string(b - 1);
        if (b < 2) g.indices.push_back(kSwitchFeature);
        g.indices.insert(g.indices.end(), rules.blocks[b].begin(), rules.blocks[b].end());
        groups.push_back(std::move(g));
      }
      data.default_groups = FeatureGroupSpec(d, std::move(groups));
      break;
    }
    case SyntheticKind::kMultiSkill: {
      // x0 carries the task indicator in its sign; |x0| stays half-normal so
      // the column is still marginally standard normal.
      const auto rule_blocks = blocks(1, d, 2);
      Rng rule_rng(spec.seed ^ 0x5eed5eedULL);
      const std::vector<double> w_easy = rule_weights(rule_rng, rule_blocks[0].size());
      const std::vector<double> w_hard = rule_weights(rule_rng, rule_blocks[1].size());
      const double n_easy = norm(w_easy), n_hard = norm(w_hard);
      data.categories.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        double* x = &data.features[i * d];
        const bool easy = i % 2 == 0;
        for (std::size_t j = 0; j < d; ++j) x[j] = rng.normal();
        x[0] = easy ? std::abs(x[0]) : -std::abs(x[0]);
        const auto& block = easy ? rule_blocks[0] : rule_blocks[1];
        const auto& w = easy ? w_easy : w_hard;
        double margin;
        for (;;) {
          margin = dot(data.row(i), block, w) / (easy ? n_easy : n_hard);
          if (easy ? std::abs(margin) >= kEasyMargin : std::abs(margin) <= kHardMargin) break;
          for (std::size_t j : block) x[j] = rng.normal();
        }
        const double noise = spec.noise_std > 0 ? spec.noise_std * rng.normal() : 0.0;
        data.labels[i] = to_label(margin + noise);
        data.relevant_group[i] = easy ? 0 : 1;
        data.categories[i] = easy ? "easy" : "hard";
      }
      std::vector<FeatureGroup> groups{{"task", {0}}};
      groups.push_back({"easy_rule", rule_blocks[0]});
      groups.push_back({"hard_rule", rule_blocks[1]});
      data.default_groups = FeatureGroupSpec(d, std::move(groups));
      break;
    }
  }
  return data;
}

Standardization fit_standardization(const Dataset& data) {
  if (data.num_rows == 0) throw ValidationError("cannot standardize an empty dataset");
  const std::size_t d = data.num_features;
  Standardization s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  s.constant_column.assign(d, false);
  const double n = static_cast<double>(data.num_rows);
  for (std::size_t i = 0; i < data.num_rows; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += data.features[i * d + j];
  for (double& m : s.mean) m /= n;
  for (std::size_t i = 0; i < data.num_rows; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = data.features[i * d + j] - s.mean[j];
      s.stddev[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) {
    s.stddev[j] = std::sqrt(s.stddev[j] / n);
    if (s.stddev[j] < kConstantColumnStd) {
      s.stddev[j] = 1.0;
      s.constant_column[j] = true;
    }
  }
  return s;
}

Dataset apply_standardization(const Dataset& data, const Standardization& stats) {
  if (stats.mean.size() != data.num_features) {
    throw DimensionError("standardization fitted on " + std::to_string(stats.mean.size()) +
                         " features, dataset has " + std::to_string(data.num_features));
  }
  Dataset out = data;
  const std::size_t d = data.num_features;
  for (std::size_t i = 0; i < data.num_rows; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double& v = out.features[i * d + j];
      v = (v - stats.mean[j]) / stats.stddev[j];
    }
  out.standardization = stats;
  return out;
}

std::pair<Dataset, Standardization> standardize(const Dataset& data) {
  Standardization stats = fit_standardization(data);
  return {apply_standardization(data, stats), stats};
}

std::pair<Dataset, Dataset> split(const Dataset& data, std::array<double, 2> fractions,
                                  std::uint64_t seed, bool standardize_parts) {
  if (data.num_rows == 0) throw ValidationError("cannot split an empty dataset");
  if (fractions[0] < 0 || fractions[1] < 0 ||
      std::abs(fractions[0] + fractions[1] - 1.0) > 1e-9) {
    throw ParameterError("split fractions must be non-negative and sum to 1");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.num_rows; ++i) by_label[data.labels[i]].push_back(i);

  // Largest-remainder allocation hits the rounded train size exactly while
  // keeping each class within one row of its proportional share.
  const auto target = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(data.num_rows)));
  std::vector<std::pair<double, std::size_t>> remainders;
  std::map<std::size_t, std::size_t> quota;
  std::size_t assigned = 0;
  for (const auto& [label, rows] : by_label) {
    const double exact = fractions[0] * static_cast<double>(rows.size());
    quota[label] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[label];
    remainders.emplace_back(exact - std::floor(exact), label);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r, ++assigned) {
    ++quota[remainders[r].second];
  }

  Rng rng(seed);
  std::vector<std::size_t> train_rows, test_rows;
  for (auto& [label, rows] : by_label) {
    std::vector<std::size_t> shuffled = rows;
    rng.shuffle(shuffled);
    train_rows.insert(train_rows.end(), shuffled.begin(), shuffled.begin() + quota[label]);
    test_rows.insert(test_rows.end(), shuffled.begin() + quota[label], shuffled.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  if (train_rows.empty() || test_rows.empty()) {
    throw ValidationError("split of " + std::to_string(data.num_rows) +
                          " rows produced an empty part");
  }
  Dataset train = data.subset(train_rows);
  Dataset test = data.subset(test_rows);
  if (standardize_parts) {
    const Standardization stats = fit_standardization(train);
    train = apply_standardization(train, stats);
    test = apply_standardization(test, stats);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace glassbox
