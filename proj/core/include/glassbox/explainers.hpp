#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassbox/data.hpp"
#include "glassbox/explanation.hpp"
#include "glassbox/interpretcc.hpp"
#include "glassbox/model.hpp"

namespace glassbox {

// Opaque classifier. `predict` must be safe for concurrent read-only calls.
struct BlackBox {
  std::function<std::vector<double>(std::span<const double>)> predict;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;

  // Validates the input length and that the output is a distribution (±1e-6).
  std::vector<double> operator()(std::span<const double> x) const;

  // Borrows `model`, which must outlive the returned BlackBox.
  static BlackBox from_model(const Model& model);
};

constexpr std::size_t kMaxExactShapleyFeatures = 15;

// Exact Shapley values over all 2^d coalitions; absent features take their
// baseline value. Refuses d > kMaxExactShapleyFeatures. Target class defaults
// to the arg-max class at x.
Explanation shapley_exact(const BlackBox& f, std::span<const double> x,
                          std::span<const double> baseline,
                          std::optional<std::size_t> target_class = std::nullopt);

// Monte-Carlo permutation estimator of the same values (unbiased).
Explanation shapley_sampled(const BlackBox& f, std::span<const double> x,
                            std::span<const double> baseline, std::size_t n_permutations,
                            std::uint64_t seed,
                            std::optional<std::size_t> target_class = std::nullopt);

struct LimeOptions {
  std::size_t n_samples = 1000;
  std::optional<double> kernel_width;  // default 0.75 * sqrt(d)
  double ridge = 1e-3;
  double perturbation_std = 1.0;
};

// Weighted ridge fit of the target-class probability on Gaussian perturbations
// around x, weighted by exp(-|z - x|^2 / width^2). Attributions are the slopes.
Explanation lime_local(const BlackBox& f, std::span<const double> x, const LimeOptions& options,
                       std::uint64_t seed,
                       std::optional<std::size_t> target_class = std::nullopt);

struct PermutationOptions {
  std::size_t repeats = 5;
};

// Global importance: drop in accuracy when one column is shuffled, averaged
// over `repeats` shuffles.
Explanation permutation_importance(const BlackBox& f, const Dataset& data, std::uint64_t seed,
                                   const PermutationOptions& options = {});

// Uniform explainer signature used by the metrics and the benchmark.
using ExplainFn = std::function<Explanation(std::span<const double> x, std::uint64_t seed)>;

struct ExplainerConfig {
  std::string method;
  std::size_t n_permutations = 1000;
  LimeOptions lime;
  PermutationOptions permutation;
};

const std::vector<std::string>& explainer_methods();

// Binds a method to its inputs. "interpretcc" needs `intrinsic`; "permutation"
// needs `reference`. Unknown methods raise ValidationError listing valid tags.
ExplainFn make_explainer(const ExplainerConfig& config, const BlackBox& f,
                         std::vector<double> baseline, const Dataset* reference = nullptr,
                         const GatedModel* intrinsic = nullptr);

}  // namespace glassbox
