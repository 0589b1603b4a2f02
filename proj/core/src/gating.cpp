#include "glassbox/gating.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glassbox/error.hpp"
#include "glassbox/ops.hpp"

namespace glassbox {
namespace {

void require_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ParameterError("gate temperature must be positive, got " + std::to_string(temperature));
  }
}

// Row-wise selection over arbitrary real keys (scores or perturbed logits).
// `cut` is the threshold the key must reach to be active.
void select_row(std::span<const double> keys, double cut, const SelectionMode& selection,
                std::span<double> hard) {
  const std::size_t n = keys.size();
  std::fill(hard.begin(), hard.end(), 0.0);
  if (selection.kind == SelectionMode::Kind::kTopK) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
    for (std::size_t r = 0; r < std::min(selection.k, n); ++r) hard[order[r]] = 1.0;
    return;
  }
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (keys[i] >= cut) {
      hard[i] = 1.0;
      any = true;
    }
  }
  if (!any && n > 0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (keys[i] > keys[best]) best = i;
    }
    hard[best] = 1.0;
  }
}

}  // namespace

double gate_score(double logit) {
  if (logit >= 0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

std::string to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::kTrainSoft: return "train_soft";
    case MaskMode::kTrainRelaxed: return "train_relaxed";
    case MaskMode::kInferenceHard: return "inference_hard";
  }
  return "unknown";
}

void GateConfig::validate(std::size_t num_units) const {
  if (!(sparsity_coefficient >= 0.0)) {
    throw ParameterError("sparsity coefficient must be non-negative");
  }
  if (!(temperature_end > 0.0) || !(temperature_start >= temperature_end)) {
    throw ParameterError("gate temperatures must satisfy start >= end > 0");
  }
  if (!(anneal_rate > 0.0 && anneal_rate <= 1.0)) {
    throw ParameterError("anneal rate must lie in (0, 1]");
  }
  if (selection.kind == SelectionMode::Kind::kTopK &&
      (selection.k < 1 || selection.k > num_units)) {
    throw ParameterError("top-k selection needs 1 <= k <= " + std::to_string(num_units));
  }
}

double GateConfig::temperature_at(std::size_t epoch) const {
  return std::max(temperature_end,
                  temperature_start * std::pow(anneal_rate, static_cast<double>(epoch)));
}

nlohmann::json GateConfig::to_json() const {
  nlohmann::json sel;
  if (selection.kind == SelectionMode::Kind::kTopK) {
    sel = {{"kind", "top_k"}, {"k", selection.k}};
  } else {
    sel = {{"kind", "threshold"}, {"threshold", 0.5}};
  }
  return {{"sparsity_coefficient", sparsity_coefficient},
          {"temperature_start", temperature_start},
          {"temperature_end", temperature_end},
          {"anneal_rate", anneal_rate},
          {"selection", sel}};
}

GateConfig GateConfig::from_json(const nlohmann::json& j) {
  GateConfig c;
  c.sparsity_coefficient = j.value("sparsity_coefficient", c.sparsity_coefficient);
  c.temperature_start = j.value("temperature_start", c.temperature_start);
  c.temperature_end = j.value("temperature_end", c.temperature_end);
  c.anneal_rate = j.value("anneal_rate", c.anneal_rate);
  if (j.contains("selection")) {
    const auto& sel = j.at("selection");
    const std::string kind = sel.value("kind", std::string("threshold"));
    if (kind == "top_k") {
      c.selection = SelectionMode::top_k(sel.at("k").get<std::size_t>());
    } else if (kind == "threshold") {
      c.selection = SelectionMode::threshold();
    } else {
      throw ValidationError("unknown selection kind '" + kind + "'");
    }
  }
  return c;
}

std::size_t RoutingDecision::num_active() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

std::vector<bool> select_active(std::span<const double> scores, const SelectionMode& selection) {
  std::vector<bool> active(scores.size(), false);
  if (selection.kind == SelectionMode::Kind::kThreshold) {
    std::size_t best = 0;
    bool any = false;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      active[i] = scores[i] >= 0.5;
      any = any || active[i];
      if (scores[i] > scores[best]) best = i;
    }
    if (!any && !scores.empty()) active[best] = true;
    return active;
  }
  std::vector<double> hard(scores.size());
  select_row(scores, 0.5, selection, hard);
  for (std::size_t i = 0; i < scores.size(); ++i) active[i] = hard[i] == 1.0;
  return active;
}

Tensor hard_mask(const Tensor& probabilities, double temperature, Rng* rng, MaskMode mode) {
  require_temperature(temperature);
  auto p = probabilities.values();
  for (double v : p) {
    if (!(v > 0.0 && v < 1.0)) {
      throw DomainError("hard_mask: probabilities must lie in (0, 1), got " + std::to_string(v));
    }
  }
  if (mode == MaskMode::kInferenceHard) {
    std::vector<double> hard(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) hard[i] = p[i] >= 0.5 ? 1.0 : 0.0;
    return Tensor(probabilities.shape(), std::move(hard));
  }
  if (rng == nullptr) throw ParameterError("hard_mask: training modes need a random generator");
  std::vector<double> noise(p.size());
  for (double& v : noise) v = rng->logistic();
  Tensor logits = sub(log(probabilities), log(affine(probabilities, -1.0, 1.0)));
  Tensor perturbed = add(logits, Tensor(probabilities.shape(), noise));
  Tensor soft = sigmoid(scale(perturbed, 1.0 / temperature));
  if (mode == MaskMode::kTrainRelaxed) return soft;
  std::vector<double> hard(p.size());
  auto pv = perturbed.values();
  for (std::size_t i = 0; i < p.size(); ++i) hard[i] = pv[i] >= 0.0 ? 1.0 : 0.0;
  return straight_through(soft, std::move(hard));
}

Tensor gate_sample(const Tensor& logits, double temperature, Rng* rng, MaskMode mode,
                   const SelectionMode& selection, std::vector<double>* noise_out) {
  require_temperature(temperature);
  if (logits.ndim() != 2) {
    throw DimensionError("gate_sample expects [batch, units] logits, got " +
                         shape_string(logits.shape()));
  }
  const std::size_t rows = logits.rows(), units = logits.cols();
  auto lv = logits.values();
  std::vector<double> hard(lv.size());

  if (mode == MaskMode::kInferenceHard) {
    std::vector<double> scores(units);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t u = 0; u < units; ++u) scores[u] = gate_score(lv[r * units + u]);
      select_row(scores, 0.5, selection, std::span<double>(hard).subspan(r * units, units));
    }
    return Tensor(logits.shape(), std::move(hard));
  }

  if (rng == nullptr) throw ParameterError("gate_sample: training modes need a random generator");
  std::vector<double> noise(lv.size());
  for (double& v : noise) v = rng->logistic();
  Tensor perturbed = add(logits, Tensor(logits.shape(), noise));
  if (noise_out) *noise_out = noise;
  Tensor soft = sigmoid(scale(perturbed, 1.0 / temperature));
  if (mode == MaskMode::kTrainRelaxed) return soft;
  auto pv = perturbed.values();
  for (std::size_t r = 0; r < rows; ++r) {
    select_row(pv.subspan(r * units, units), 0.0, selection,
               std::span<double>(hard).subspan(r * units, units));
  }
  return straight_through(soft, std::move(hard));
}

Tensor sparsity_penalty(const Tensor& scores, double lambda) {
  if (lambda < 0.0) throw ParameterError("sparsity coefficient must be non-negative");
  return scale(mean(scores), lambda);
}

double sparsity_penalty(std::span<const double> scores, double lambda) {
  if (lambda < 0.0) throw ParameterError("sparsity coefficient must be non-negative");
  if (scores.empty()) return 0.0;
  for (double s : scores) {
    if (s < 0.0 || s > 1.0) throw DomainError("sparsity_penalty: scores must lie in [0, 1]");
  }
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  return lambda * total / static_cast<double>(scores.size());
}

}  // namespace glassbox
