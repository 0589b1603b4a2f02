#include "glassbox/interpretcc.hpp"

#include <chrono>

#include "glassbox/error.hpp"
#include "glassbox/ops.hpp"

namespace glassbox {

void GatedModel::check_input(std::span<const double> x) const {
  if (x.size() != num_features()) {
    throw DimensionError(kind() + ": expected " + std::to_string(num_features()) +
                         " features, got " + std::to_string(x.size()));
  }
}

std::vector<double> GatedModel::active_weights(const RoutingDecision& decision) {
  std::vector<double> weights;
  active_weights(decision, weights);
  return weights;
}

void GatedModel::active_weights(const RoutingDecision& decision, std::vector<double>& weights) {
  const std::size_t n = decision.scores.size();
  if (decision.active.size() != n) {
    throw ContractError("routing decision has mismatched scores/active lengths");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t g = 0; g < n; ++g) {
    if (decision.active[g]) {
      total += decision.scores[g];
      ++count;
    }
  }
  if (count == 0) throw ContractError("routing decision activates no group");
  weights.assign(n, 0.0);
  for (std::size_t g = 0; g < n; ++g) {
    if (!decision.active[g]) continue;
    // Scores that underflowed to zero fall back to an even split.
    weights[g] = total > 0.0 ? decision.scores[g] / total : 1.0 / static_cast<double>(count);
  }
}

RoutingDecision GatedModel::route(std::span<const double> x, MaskMode mode, double temperature,
                                  Rng* rng) const {
  check_input(x);
  RoutingDecision decision;
  decision.mode = mode;
  decision.scores = router_logits(x);
  const std::vector<double> logits = mode == MaskMode::kInferenceHard ? std::vector<double>{} : decision.scores;
  for (double& s : decision.scores) s = gate_score(s);
  if (mode == MaskMode::kInferenceHard) {
    decision.active = select_active(decision.scores, gate_config().selection);
    return decision;
  }
  Tensor mask = gate_sample(Tensor::matrix(1, logits.size(), logits), temperature, rng,
                            MaskMode::kTrainSoft, gate_config().selection);
  decision.active.resize(logits.size());
  for (std::size_t g = 0; g < logits.size(); ++g) decision.active[g] = mask[g] == 1.0;
  return decision;
}

GatedPrediction GatedModel::predict(std::span<const double> x) const {
  const auto start = std::chrono::steady_clock::now();
  GatedPrediction out;
  out.decision = route(x);
  out.probabilities = predict_with_routing(x, out.decision);
  const auto stop = std::chrono::steady_clock::now();
  out.latency_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return out;
}

std::vector<double> GatedModel::predict_proba(std::span<const double> x) const {
  return predict_with_routing(x, route(x));
}

Explanation GatedModel::explain(std::span<const double> x) const {
  GatedPrediction prediction = predict(x);
  const auto& spec = groups();
  thread_local std::vector<double> weights;
  active_weights(prediction.decision, weights);
  Explanation e;
  e.method = "interpretcc";
  e.attributions.assign(num_features(), 0.0);
  e.active_groups.reserve(prediction.decision.num_active());
  for (std::size_t g = 0; g < spec.num_groups(); ++g) {
    if (!prediction.decision.active[g]) continue;
    const auto& indices = spec.group(g).indices;
    const double share = weights[g] / static_cast<double>(indices.size());
    for (std::size_t f : indices) e.attributions[f] += share;
    e.active_groups.push_back({spec.group(g).name, prediction.decision.scores[g]});
  }
  e.target_class = argmax(prediction.probabilities);
  e.latency_ms = prediction.latency_ms;
  return e;
}

nlohmann::json InterpretCCConfig::to_json() const {
  return {{"kind", InterpretCCModel::kKind},
          {"groups", groups.to_json()},
          {"num_classes", num_classes},
          {"discriminator_hidden", discriminator_hidden},
          {"expert_hidden", expert_hidden},
          {"activation", glassbox::to_string(activation)},
          {"gate", gate.to_json()},
          {"imputation", imputation}};
}

InterpretCCConfig InterpretCCConfig::from_json(const nlohmann::json& j) {
  InterpretCCConfig c;
  c.groups = FeatureGroupSpec::from_json(j.at("groups"));
  c.num_classes = j.value("num_classes", c.num_classes);
  c.discriminator_hidden = j.value("discriminator_hidden", c.discriminator_hidden);
  c.expert_hidden = j.value("expert_hidden", c.expert_hidden);
  c.activation = activation_from_string(j.value("activation", std::string("relu")));
  if (j.contains("gate")) c.gate = GateConfig::from_json(j.at("gate"));
  c.imputation = j.value("imputation", std::vector<double>{});
  return c;
}

InterpretCCModel::InterpretCCModel(InterpretCCConfig config, Rng& rng)
    : config_(std::move(config)) {
  const std::size_t d = config_.groups.num_features();
  if (d == 0) throw ParameterError("interpretcc: feature groups are empty");
  if (config_.num_classes < 2) throw ParameterError("interpretcc: need at least two classes");
  config_.gate.validate(config_.groups.num_groups());
  set_imputation_values(config_.imputation);
  discriminator_ = Mlp({d, config_.discriminator_hidden, config_.groups.num_groups(),
                        config_.activation},
                       rng);
  for (const auto& group : config_.groups.groups()) {
    experts_.emplace_back(
        MlpConfig{group.indices.size(), config_.expert_hidden, config_.num_classes,
                  config_.activation},
        rng);
  }
}

std::vector<Tensor> InterpretCCModel::parameters() const {
  std::vector<Tensor> params = discriminator_.parameters();
  for (const auto& expert : experts_) {
    auto p = expert.parameters();
    params.insert(params.end(), p.begin(), p.end());
  }
  return params;
}

void InterpretCCModel::set_gate_config(const GateConfig& config) {
  config.validate(config_.groups.num_groups());
  config_.gate = config;
}

void InterpretCCModel::set_imputation_values(std::vector<double> values) {
  if (values.empty()) values.assign(num_features(), 0.0);
  if (values.size() != num_features()) {
    throw DimensionError("imputation vector has " + std::to_string(values.size()) +
                         " entries for " + std::to_string(num_features()) + " features");
  }
  config_.imputation = std::move(values);
}

std::vector<double> InterpretCCModel::router_logits(std::span<const double> x) const {
  check_input(x);
  return discriminator_.forward_values(x);
}

std::vector<double> InterpretCCModel::predict_with_routing(std::span<const double> x,
                                                           const RoutingDecision& decision) const {
  check_input(x);
  if (decision.active.size() != config_.groups.num_groups()) {
    throw DimensionError("routing decision covers " + std::to_string(decision.active.size()) +
                         " groups, model has " + std::to_string(config_.groups.num_groups()));
  }
  thread_local std::vector<double> weights, gathered, out, scratch;
  active_weights(decision, weights);
  std::vector<double> logits(config_.num_classes, 0.0);
  for (std::size_t g = 0; g < experts_.size(); ++g) {
    if (!decision.active[g]) continue;
    const auto& indices = config_.groups.group(g).indices;
    gathered.resize(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) gathered[k] = x[indices[k]];
    experts_[g].forward_values(gathered, out, scratch);
    for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += weights[g] * out[c];
  }
  softmax_inplace(logits);
  return logits;
}

Tensor InterpretCCModel::expert_logits(std::size_t g, const Tensor& x) const {
  const auto& indices = config_.groups.group(g).indices;
  return experts_.at(g).forward(select_columns(x, indices));
}

GatedForward InterpretCCModel::forward_batch(const Tensor& x, MaskMode mode, double temperature,
                                             Rng* rng) const {
  if (x.ndim() != 2 || x.cols() != num_features()) {
    throw DimensionError("interpretcc: expected [batch, " + std::to_string(num_features()) +
                         "], got " + shape_string(x.shape()));
  }
  GatedForward out;
  Tensor router = discriminator_.forward(x);
  out.scores = sigmoid(router);
  out.mask = gate_sample(router, temperature, rng, mode, config_.gate.selection);
  Tensor weighted = mul(out.mask, out.scores);
  Tensor normalized = div_col(weighted, row_sum(weighted));
  for (std::size_t g = 0; g < experts_.size(); ++g) {
    const std::size_t column[] = {g};
    Tensor term = mul_col(expert_logits(g, x), select_columns(normalized, column));
    out.logits = out.logits.defined() ? add(out.logits, term) : term;
  }
  return out;
}

}  // namespace glassbox
