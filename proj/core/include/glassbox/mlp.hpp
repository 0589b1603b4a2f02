#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "glassbox/rng.hpp"
#include "glassbox/tensor.hpp"
#include "json.hpp"

namespace glassbox {

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MlpConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 0;
  Activation activation = Activation::kRelu;

  nlohmann::json to_json() const;
  static MlpConfig from_json(const nlohmann::json& j);
};

// Fully connected network: hidden layers with `activation`, linear output.
class Mlp {
 public:
  Mlp() = default;
  // He-uniform (relu) or Glorot-uniform (tanh) weights, zero biases.
  Mlp(MlpConfig config, Rng& rng);

  const MlpConfig& config() const { return config_; }

  // [batch, input_dim] -> [batch, output_dim] on the tape.
  Tensor forward(const Tensor& x) const;
  // Tape-free single-row forward pass. `scratch` is reused between calls.
  void forward_values(std::span<const double> x, std::vector<double>& out,
                      std::vector<double>& scratch) const;
  std::vector<double> forward_values(std::span<const double> x) const;

  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

 private:
  MlpConfig config_;
  std::vector<Tensor> weights_;  // [in, out]
  std::vector<Tensor> biases_;   // [out]
};

}  // namespace glassbox
