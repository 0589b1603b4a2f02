#include "glassbox/model.hpp"

#include <algorithm>
#include <cmath>

#include "glassbox/error.hpp"
#include "glassbox/feature_gating.hpp"
#include "glassbox/interpretcc.hpp"

namespace glassbox {

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw DimensionError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

void softmax_inplace(std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : logits) v /= z;
}

MlpClassifier::MlpClassifier(MlpConfig config, Rng& rng) : net_(std::move(config), rng) {}

nlohmann::json MlpClassifier::architecture() const {
  return {{"kind", kKind}, {"network", net_.config().to_json()}};
}

std::vector<double> MlpClassifier::predict_proba(std::span<const double> x) const {
  thread_local std::vector<double> scratch;
  std::vector<double> out;
  net_.forward_values(x, out, scratch);
  softmax_inplace(out);
  return out;
}

std::unique_ptr<Model> build_model(const nlohmann::json& architecture, Rng& init_rng) {
  const std::string kind = architecture.at("kind").get<std::string>();
  if (kind == MlpClassifier::kKind) {
    return std::make_unique<MlpClassifier>(MlpConfig::from_json(architecture.at("network")),
                                           init_rng);
  }
  if (kind == InterpretCCModel::kKind) {
    return std::make_unique<InterpretCCModel>(InterpretCCConfig::from_json(architecture),
                                              init_rng);
  }
  if (kind == FeatureGatingModel::kKind) {
    return std::make_unique<FeatureGatingModel>(FeatureGatingConfig::from_json(architecture),
                                                init_rng);
  }
  throw ValidationError("unknown model kind '" + kind +
                        "' (expected mlp_blackbox, feature_gating or interpretcc_moe)");
}

void load_parameters(Model& model, const std::vector<std::vector<double>>& values) {
  auto params = model.parameters();
  if (params.size() != values.size()) {
    throw DimensionError("model has " + std::to_string(params.size()) +
                         " parameter tensors, got " + std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != values[i].size()) {
      throw DimensionError("parameter " + std::to_string(i) + " of shape " +
                           shape_string(params[i].shape()) + " cannot take " +
                           std::to_string(values[i].size()) + " values");
    }
    for (double v : values[i]) {
      if (!std::isfinite(v)) throw NumericError("non-finite parameter value in parameter " + std::to_string(i));
    }
    std::copy(values[i].begin(), values[i].end(), params[i].data().begin());
  }
}

std::vector<std::vector<double>> parameter_values(const Model& model) {
  std::vector<std::vector<double>> out;
  for (const auto& p : model.parameters()) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

std::unique_ptr<Model> clone_model(const Model& model) {
  Rng scratch(0);
  auto copy = build_model(model.architecture(), scratch);
  load_parameters(*copy, parameter_values(model));
  return copy;
}

}  // namespace glassbox
