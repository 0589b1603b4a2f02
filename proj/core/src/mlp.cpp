#include "glassbox/mlp.hpp"

#include <cmath>

#include "glassbox/error.hpp"
#include "glassbox/ops.hpp"

namespace glassbox {

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ValidationError("unknown activation '" + name + "' (expected relu or tanh)");
}

nlohmann::json MlpConfig::to_json() const {
  return {{"input_dim", input_dim},
          {"hidden", hidden},
          {"output_dim", output_dim},
          {"activation", to_string(activation)}};
}

MlpConfig MlpConfig::from_json(const nlohmann::json& j) {
  MlpConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  c.activation = activation_from_string(j.value("activation", std::string("relu")));
  return c;
}

Mlp::Mlp(MlpConfig config, Rng& rng) : config_(std::move(config)) {
  if (config_.input_dim == 0 || config_.output_dim == 0) {
    throw ParameterError("mlp: input and output dimensions must be positive");
  }
  std::size_t fan_in = config_.input_dim;
  auto add_layer = [&](std::size_t fan_out) {
    const double bound = config_.activation == Activation::kRelu
                             ? std::sqrt(6.0 / static_cast<double>(fan_in))
                             : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    weights_.push_back(Tensor::matrix(fan_in, fan_out, std::move(w), true));
    biases_.push_back(Tensor::zeros({fan_out}, true));
    fan_in = fan_out;
  };
  for (std::size_t width : config_.hidden) {
    if (width == 0) throw ParameterError("mlp: hidden width must be positive");
    add_layer(width);
  }
  add_layer(config_.output_dim);
}

Tensor Mlp::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.cols() != config_.input_dim) {
    throw DimensionError("mlp expects [batch, " + std::to_string(config_.input_dim) +
                         "], got " + shape_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = add_bias(matmul(h, weights_[l]), biases_[l]);
    if (l + 1 < weights_.size()) {
      h = config_.activation == Activation::kRelu ? relu(h) : tanh(h);
    }
  }
  return h;
}

void Mlp::forward_values(std::span<const double> x, std::vector<double>& out,
                         std::vector<double>& scratch) const {
  if (x.size() != config_.input_dim) {
    throw DimensionError("mlp expects " + std::to_string(config_.input_dim) +
                         " inputs, got " + std::to_string(x.size()));
  }
  // Hidden activations ping-pong between two halves of `scratch`; the last
  // layer writes straight into `out`.
  std::size_t widest = 0;
  for (std::size_t width : config_.hidden) widest = std::max(widest, width);
  scratch.resize(2 * widest);
  out.resize(config_.output_dim);
  const double* src = x.data();
  const std::size_t layers = weights_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const double* w = weights_[l].values().data();
    const double* b = biases_[l].values().data();
    const std::size_t in = weights_[l].shape()[0];
    const std::size_t width = weights_[l].shape()[1];
    double* dst = l + 1 == layers ? out.data() : scratch.data() + (l % 2) * widest;
    if (width < 8) {
      // Narrow layers: one dot product per output keeps the sum in a register.
      for (std::size_t j = 0; j < width; ++j) {
        double acc = b[j];
        for (std::size_t i = 0; i < in; ++i) acc += src[i] * w[i * width + j];
        dst[j] = acc;
      }
    } else {
      std::copy(b, b + width, dst);
      for (std::size_t i = 0; i < in; ++i) {
        const double xi = src[i];
        const double* row = w + i * width;
        for (std::size_t j = 0; j < width; ++j) dst[j] += xi * row[j];
      }
    }
    if (l + 1 < layers) {
      if (config_.activation == Activation::kRelu) {
        for (std::size_t j = 0; j < width; ++j) dst[j] = dst[j] > 0.0 ? dst[j] : 0.0;
      } else {
        for (std::size_t j = 0; j < width; ++j) dst[j] = std::tanh(dst[j]);
      }
    }
    src = dst;
  }
}

std::vector<double> Mlp::forward_values(std::span<const double> x) const {
  thread_local std::vector<double> scratch;
  std::vector<double> out;
  forward_values(x, out, scratch);
  return out;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> params;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    params.push_back(weights_[l]);
    params.push_back(biases_[l]);
  }
  return params;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

}  // namespace glassbox
