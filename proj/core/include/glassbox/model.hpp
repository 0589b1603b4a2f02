#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "glassbox/mlp.hpp"
#include "glassbox/rng.hpp"
#include "glassbox/tensor.hpp"
#include "json.hpp"

namespace glassbox {

// Common surface of every trainable classifier: enough to serialize it,
// rebuild it from its architecture record, and query it as a black box.
// Prediction is const and safe for concurrent readers.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t num_features() const = 0;
  virtual std::size_t num_classes() const = 0;
  // Everything needed to rebuild the parameter shapes; always carries "kind".
  virtual nlohmann::json architecture() const = 0;
  // Parameter handles in a fixed order (shared with the model).
  virtual std::vector<Tensor> parameters() const = 0;
  virtual std::vector<double> predict_proba(std::span<const double> x) const = 0;
};

// Plain dense classifier; the black box that post-hoc explainers are applied to.
class MlpClassifier : public Model {
 public:
  static constexpr const char* kKind = "mlp_blackbox";

  MlpClassifier(MlpConfig config, Rng& rng);

  std::string kind() const override { return kKind; }
  std::size_t num_features() const override { return net_.config().input_dim; }
  std::size_t num_classes() const override { return net_.config().output_dim; }
  nlohmann::json architecture() const override;
  std::vector<Tensor> parameters() const override { return net_.parameters(); }
  std::vector<double> predict_proba(std::span<const double> x) const override;

  Tensor logits(const Tensor& batch) const { return net_.forward(batch); }
  const Mlp& network() const { return net_; }

 private:
  Mlp net_;
};

// Rebuilds a freshly initialized model of the recorded kind and shape.
std::unique_ptr<Model> build_model(const nlohmann::json& architecture, Rng& init_rng);
// Copies parameter values into `model`, checking count and shapes.
void load_parameters(Model& model, const std::vector<std::vector<double>>& values);
std::vector<std::vector<double>> parameter_values(const Model& model);
std::unique_ptr<Model> clone_model(const Model& model);

std::size_t argmax(std::span<const double> values);
void softmax_inplace(std::vector<double>& logits);

}  // namespace glassbox
