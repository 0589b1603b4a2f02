#include "glassbox/feature_gating.hpp"

#include "glassbox/error.hpp"
#include "glassbox/ops.hpp"

namespace glassbox {

nlohmann::json FeatureGatingConfig::to_json() const {
  return {{"kind", FeatureGatingModel::kKind},
          {"num_features", num_features},
          {"num_classes", num_classes},
          {"gate_hidden", gate_hidden},
          {"predictor_hidden", predictor_hidden},
          {"activation", glassbox::to_string(activation)},
          {"gate", gate.to_json()},
          {"imputation", imputation},
          {"feature_names", feature_names}};
}

FeatureGatingConfig FeatureGatingConfig::from_json(const nlohmann::json& j) {
  FeatureGatingConfig c;
  c.num_features = j.at("num_features").get<std::size_t>();
  c.num_classes = j.value("num_classes", c.num_classes);
  c.gate_hidden = j.value("gate_hidden", c.gate_hidden);
  c.predictor_hidden = j.value("predictor_hidden", c.predictor_hidden);
  c.activation = activation_from_string(j.value("activation", std::string("relu")));
  if (j.contains("gate")) c.gate = GateConfig::from_json(j.at("gate"));
  c.imputation = j.value("imputation", std::vector<double>{});
  c.feature_names = j.value("feature_names", std::vector<std::string>{});
  return c;
}

FeatureGatingModel::FeatureGatingModel(FeatureGatingConfig config, Rng& rng)
    : config_(std::move(config)) {
  const std::size_t d = config_.num_features;
  if (d == 0) throw ParameterError("feature_gating: num_features must be positive");
  if (config_.num_classes < 2) throw ParameterError("feature_gating: need at least two classes");
  config_.gate.validate(d);
  singletons_ = FeatureGroupSpec::singletons(d, config_.feature_names);
  set_imputation_values(config_.imputation);
  gate_ = Mlp({d, config_.gate_hidden, d, config_.activation}, rng);
  predictor_ = Mlp({d, config_.predictor_hidden, config_.num_classes, config_.activation}, rng);
}

std::vector<Tensor> FeatureGatingModel::parameters() const {
  std::vector<Tensor> params = gate_.parameters();
  auto p = predictor_.parameters();
  params.insert(params.end(), p.begin(), p.end());
  return params;
}

void FeatureGatingModel::set_gate_config(const GateConfig& config) {
  config.validate(config_.num_features);
  config_.gate = config;
}

void FeatureGatingModel::set_imputation_values(std::vector<double> values) {
  if (values.empty()) values.assign(config_.num_features, 0.0);
  if (values.size() != config_.num_features) {
    throw DimensionError("imputation vector has " + std::to_string(values.size()) +
                         " entries for " + std::to_string(config_.num_features) + " features");
  }
  config_.imputation = std::move(values);
}

std::vector<double> FeatureGatingModel::router_logits(std::span<const double> x) const {
  check_input(x);
  return gate_.forward_values(x);
}

std::vector<double> FeatureGatingModel::predict_with_routing(std::span<const double> x,
                                                             const RoutingDecision& decision) const {
  check_input(x);
  if (decision.active.size() != config_.num_features) {
    throw DimensionError("routing decision covers " + std::to_string(decision.active.size()) +
                         " features, model has " + std::to_string(config_.num_features));
  }
  if (decision.num_active() == 0) throw ContractError("routing decision activates no feature");
  thread_local std::vector<double> input, scratch;
  input.resize(config_.num_features);
  for (std::size_t f = 0; f < input.size(); ++f) {
    input[f] = decision.active[f] ? x[f] : config_.imputation[f];
  }
  std::vector<double> out;
  predictor_.forward_values(input, out, scratch);
  softmax_inplace(out);
  return out;
}

GatedForward FeatureGatingModel::forward_batch(const Tensor& x, MaskMode mode, double temperature,
                                               Rng* rng) const {
  if (x.ndim() != 2 || x.cols() != config_.num_features) {
    throw DimensionError("feature_gating: expected [batch, " +
                         std::to_string(config_.num_features) + "], got " +
                         shape_string(x.shape()));
  }
  GatedForward out;
  Tensor router = gate_.forward(x);
  out.scores = sigmoid(router);
  out.mask = gate_sample(router, temperature, rng, mode, config_.gate.selection);
  const Tensor imputation = Tensor::vector(config_.imputation);
  const Tensor centred = add_bias(x, scale(imputation, -1.0));
  const Tensor input = add_bias(mul(out.mask, centred), imputation);
  out.logits = predictor_.forward(input);
  return out;
}

}  // namespace glassbox
