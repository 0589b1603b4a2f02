#pragma once

#include <string>
#include <vector>

#include "glassbox/interpretcc.hpp"

namespace glassbox {

struct FeatureGatingConfig {
  std::size_t num_features = 0;
  std::size_t num_classes = 2;
  std::vector<std::size_t> gate_hidden{16};
  std::vector<std::size_t> predictor_hidden{16};
  Activation activation = Activation::kRelu;
  GateConfig gate;
  std::vector<double> imputation;  // empty means all zeros
  std::vector<std::string> feature_names;

  nlohmann::json to_json() const;
  static FeatureGatingConfig from_json(const nlohmann::json& j);
};

// Learned per-instance feature mask. The predictor sees
// mask * x + (1 - mask) * imputation; at inference the mask is exactly binary
// and masked features are replaced outright.
class FeatureGatingModel : public GatedModel {
 public:
  static constexpr const char* kKind = "feature_gating";

  FeatureGatingModel(FeatureGatingConfig config, Rng& rng);

  std::string kind() const override { return kKind; }
  std::size_t num_features() const override { return config_.num_features; }
  std::size_t num_classes() const override { return config_.num_classes; }
  nlohmann::json architecture() const override { return config_.to_json(); }
  std::vector<Tensor> parameters() const override;

  const FeatureGroupSpec& groups() const override { return singletons_; }
  const GateConfig& gate_config() const override { return config_.gate; }
  void set_gate_config(const GateConfig& config) override;
  const std::vector<double>& imputation_values() const override { return config_.imputation; }
  void set_imputation_values(std::vector<double> values) override;

  std::vector<double> router_logits(std::span<const double> x) const override;
  std::vector<double> predict_with_routing(std::span<const double> x,
                                           const RoutingDecision& decision) const override;
  GatedForward forward_batch(const Tensor& x, MaskMode mode, double temperature,
                             Rng* rng) const override;

 private:
  FeatureGatingConfig config_;
  FeatureGroupSpec singletons_;
  Mlp gate_;
  Mlp predictor_;
};

}  // namespace glassbox
