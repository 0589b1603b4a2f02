#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "glassbox/explanation.hpp"
#include "glassbox/feature_groups.hpp"
#include "glassbox/gating.hpp"
#include "glassbox/mlp.hpp"
#include "glassbox/model.hpp"

namespace glassbox {

struct GatedForward {
  Tensor logits;  // [batch, classes]
  Tensor scores;  // [batch, units], sigmoid of router logits
  Tensor mask;    // [batch, units]
};

struct GatedPrediction {
  std::vector<double> probabilities;
  RoutingDecision decision;
  double latency_ms = 0.0;
};

// Shared surface of the interpretable-by-design architectures. A router scores
// each unit (feature group, or single feature for the gating model); only the
// selected units' features reach the predictor, so the routing decision is the
// explanation. Inference is a pure function of (parameters, x).
class GatedModel : public Model {
 public:
  virtual const FeatureGroupSpec& groups() const = 0;
  virtual const GateConfig& gate_config() const = 0;
  virtual void set_gate_config(const GateConfig& config) = 0;
  // Baseline written into masked features; training-set means.
  virtual const std::vector<double>& imputation_values() const = 0;
  virtual void set_imputation_values(std::vector<double> values) = 0;

  virtual std::vector<double> router_logits(std::span<const double> x) const = 0;
  // Reads only the features of active units; throws ContractError when no unit
  // is active.
  virtual std::vector<double> predict_with_routing(std::span<const double> x,
                                                   const RoutingDecision& decision) const = 0;
  virtual GatedForward forward_batch(const Tensor& x, MaskMode mode, double temperature,
                                     Rng* rng) const = 0;

  // Training modes draw gate noise from `rng` at `temperature`.
  RoutingDecision route(std::span<const double> x, MaskMode mode = MaskMode::kInferenceHard,
                        double temperature = 1.0, Rng* rng = nullptr) const;
  GatedPrediction predict(std::span<const double> x) const;
  // Attribution mass over active units proportional to their renormalized
  // scores, split evenly across each unit's features; zero elsewhere.
  Explanation explain(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const override;

 protected:
  void check_input(std::span<const double> x) const;
  // Renormalized score weights over active units (sum to 1).
  static std::vector<double> active_weights(const RoutingDecision& decision);
  static void active_weights(const RoutingDecision& decision, std::vector<double>& weights);
};

struct InterpretCCConfig {
  FeatureGroupSpec groups;
  std::size_t num_classes = 2;
  std::vector<std::size_t> discriminator_hidden{16};
  std::vector<std::size_t> expert_hidden{8, 8};
  Activation activation = Activation::kRelu;
  GateConfig gate;
  std::vector<double> imputation;  // empty means all zeros

  nlohmann::json to_json() const;
  static InterpretCCConfig from_json(const nlohmann::json& j);
};

// Mixture of experts over human-specified feature groups. The discriminator
// sees every feature; expert g is an MLP whose input layer is sized to group g
// and is fed only those columns.
class InterpretCCModel : public GatedModel {
 public:
  static constexpr const char* kKind = "interpretcc_moe";

  InterpretCCModel(InterpretCCConfig config, Rng& rng);

  std::string kind() const override { return kKind; }
  std::size_t num_features() const override { return config_.groups.num_features(); }
  std::size_t num_classes() const override { return config_.num_classes; }
  nlohmann::json architecture() const override { return config_.to_json(); }
  std::vector<Tensor> parameters() const override;

  const FeatureGroupSpec& groups() const override { return config_.groups; }
  const GateConfig& gate_config() const override { return config_.gate; }
  void set_gate_config(const GateConfig& config) override;
  const std::vector<double>& imputation_values() const override { return config_.imputation; }
  void set_imputation_values(std::vector<double> values) override;

  std::vector<double> router_logits(std::span<const double> x) const override;
  std::vector<double> predict_with_routing(std::span<const double> x,
                                           const RoutingDecision& decision) const override;
  GatedForward forward_batch(const Tensor& x, MaskMode mode, double temperature,
                             Rng* rng) const override;

  const Mlp& discriminator() const { return discriminator_; }
  const Mlp& expert(std::size_t g) const { return experts_.at(g); }
  // Expert g applied to the group-g columns of a [batch, num_features] tensor.
  Tensor expert_logits(std::size_t g, const Tensor& x) const;

 private:
  InterpretCCConfig config_;
  Mlp discriminator_;
  std::vector<Mlp> experts_;
};

}  // namespace glassbox
