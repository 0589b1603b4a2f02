#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "glassbox/explainers.hpp"
#include "glassbox/model.hpp"

namespace glassbox::testing {

// Binary model whose class-1 probability is 0.5 + w.x; exact for small inputs.
inline BlackBox linear_probability(std::vector<double> w) {
  BlackBox f;
  f.num_features = w.size();
  f.num_classes = 2;
  f.predict = [w](std::span<const double> x) {
    double p = 0.5;
    for (std::size_t i = 0; i < w.size(); ++i) p += w[i] * x[i];
    return std::vector<double>{1.0 - p, p};
  };
  return f;
}

// Binary logistic model sigmoid(w.x).
inline BlackBox logistic(std::vector<double> w) {
  BlackBox f;
  f.num_features = w.size();
  f.num_classes = 2;
  f.predict = [w](std::span<const double> x) {
    double z = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * x[i];
    const double p = 1.0 / (1.0 + std::exp(-z));
    return std::vector<double>{1.0 - p, p};
  };
  return f;
}

struct OwnedBlackBox {
  std::unique_ptr<MlpClassifier> model;
  BlackBox f;
};

inline OwnedBlackBox random_mlp(std::size_t d, std::size_t classes, std::uint64_t seed,
                                std::vector<std::size_t> hidden = {16}) {
  MlpConfig c;
  c.input_dim = d;
  c.hidden = std::move(hidden);
  c.output_dim = classes;
  Rng rng(seed);
  OwnedBlackBox out;
  out.model = std::make_unique<MlpClassifier>(c, rng);
  out.f = BlackBox::from_model(*out.model);
  return out;
}

}  // namespace glassbox::testing
