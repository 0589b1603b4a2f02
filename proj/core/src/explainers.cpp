#include "glassbox/explainers.hpp"

#include <Eigen/Dense>
#include <bit>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>

#include "glassbox/error.hpp"
#include "glassbox/rng.hpp"

namespace glassbox {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_point(const BlackBox& f, std::span<const double> x, std::span<const double> baseline,
                 const char* who) {
  if (x.size() != f.num_features || baseline.size() != f.num_features) {
    throw DimensionError(std::string(who) + ": model takes " + std::to_string(f.num_features) +
                         " features, got x of " + std::to_string(x.size()) +
                         " and baseline of " + std::to_string(baseline.size()));
  }
}

std::size_t resolve_target(const BlackBox& f, std::span<const double> x,
                           std::optional<std::size_t> target) {
  if (target) {
    if (*target >= f.num_classes) {
      throw IndexError("target class " + std::to_string(*target) + " out of range");
    }
    return *target;
  }
  return argmax(f(x));
}

}  // namespace

std::vector<double> BlackBox::operator()(std::span<const double> x) const {
  if (x.size() != num_features) {
    throw DimensionError("black box takes " + std::to_string(num_features) + " features, got " +
                         std::to_string(x.size()));
  }
  std::vector<double> p = predict(x);
  if (p.size() != num_classes) throw DimensionError("black box returned the wrong class count");
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) {
    throw ContractError("black box output sums to " + std::to_string(total) + ", not 1");
  }
  return p;
}

BlackBox BlackBox::from_model(const Model& model) {
  return {[&model](std::span<const double> x) { return model.predict_proba(x); },
          model.num_features(), model.num_classes()};
}

Explanation shapley_exact(const BlackBox& f, std::span<const double> x,
                          std::span<const double> baseline,
                          std::optional<std::size_t> target_class) {
  const auto start = Clock::now();
  check_point(f, x, baseline, "shapley_exact");
  const std::size_t d = f.num_features;
  if (d > kMaxExactShapleyFeatures) {
    throw ParameterError("shapley_exact: " + std::to_string(d) +
                         " features need 2^d model calls; the limit is " +
                         std::to_string(kMaxExactShapleyFeatures) +
                         ". Use shapley_sampled (method 'shapley_sampled') instead.");
  }
  const std::size_t target = resolve_target(f, x, target_class);
  const std::size_t coalitions = std::size_t{1} << d;

  std::vector<double> value(coalitions);
  std::vector<double> z(d);
  for (std::size_t mask = 0; mask < coalitions; ++mask) {
    for (std::size_t j = 0; j < d; ++j) z[j] = (mask >> j) & 1U ? x[j] : baseline[j];
    value[mask] = f(z)[target];
  }

  // weight[s] = s! (d - s - 1)! / d! = 1 / (d * C(d - 1, s))
  std::vector<double> weight(d);
  double binom = 1.0;
  for (std::size_t s = 0; s < d; ++s) {
    weight[s] = 1.0 / (static_cast<double>(d) * binom);
    binom = binom * static_cast<double>(d - 1 - s) / static_cast<double>(s + 1);
  }

  Explanation e;
  e.method = "shapley_exact";
  e.attributions.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < coalitions; ++mask) {
      if (mask & bit) continue;
      const double gain = value[mask | bit] - value[mask];
      if (gain != 0.0) phi += weight[std::popcount(mask)] * gain;
    }
    e.attributions[i] = phi;
  }
  e.target_class = target;
  e.latency_ms = elapsed_ms(start);
  return e;
}

Explanation shapley_sampled(const BlackBox& f, std::span<const double> x,
                            std::span<const double> baseline, std::size_t n_permutations,
                            std::uint64_t seed, std::optional<std::size_t> target_class) {
  const auto start = Clock::now();
  check_point(f, x, baseline, "shapley_sampled");
  if (n_permutations == 0) throw ParameterError("shapley_sampled needs at least one permutation");
  const std::size_t d = f.num_features;
  const std::size_t target = resolve_target(f, x, target_class);
  Rng rng(seed);

  const double empty_value = f(baseline)[target];
  std::vector<double> phi(d, 0.0);
  std::vector<double> z(d);
  for (std::size_t p = 0; p < n_permutations; ++p) {
    const std::vector<std::size_t> order = rng.permutation(d);
    std::copy(baseline.begin(), baseline.end(), z.begin());
    double previous = empty_value;
    for (std::size_t j : order) {
      z[j] = x[j];
      const double current = f(z)[target];
      phi[j] += current - previous;
      previous = current;
    }
  }
  for (double& v : phi) v /= static_cast<double>(n_permutations);

  Explanation e;
  e.method = "shapley_sampled";
  e.attributions = std::move(phi);
  e.target_class = target;
  e.seed = seed;
  e.latency_ms = elapsed_ms(start);
  return e;
}

Explanation lime_local(const BlackBox& f, std::span<const double> x, const LimeOptions& options,
                       std::uint64_t seed, std::optional<std::size_t> target_class) {
  const auto start = Clock::now();
  const std::size_t d = f.num_features;
  check_point(f, x, x, "lime_local");
  if (options.n_samples < d + 2) {
    throw ParameterError("lime_local needs at least d + 2 = " + std::to_string(d + 2) +
                         " samples, got " + std::to_string(options.n_samples));
  }
  const double width = options.kernel_width.value_or(0.75 * std::sqrt(static_cast<double>(d)));
  if (!(width > 0.0)) throw ParameterError("lime_local: kernel width must be positive");
  if (!(options.ridge >= 0.0)) throw ParameterError("lime_local: ridge must be non-negative");
  const std::size_t target = resolve_target(f, x, target_class);
  Rng rng(seed);

  const std::size_t n = options.n_samples;
  // Column 0 is the intercept; columns 1..d hold z - x.
  Eigen::MatrixXd design(n, d + 1);
  Eigen::VectorXd response(n), weights(n);
  std::vector<double> z(d);
  for (std::size_t s = 0; s < n; ++s) {
    double dist2 = 0.0;
    design(s, 0) = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = options.perturbation_std * rng.normal();
      z[j] = x[j] + delta;
      design(s, j + 1) = delta;
      dist2 += delta * delta;
    }
    response(s) = f(z)[target];
    weights(s) = std::exp(-dist2 / (width * width));
  }

  const Eigen::MatrixXd weighted = weights.asDiagonal() * design;
  const Eigen::MatrixXd gram = design.transpose() * weighted;
  const Eigen::VectorXd rhs = weighted.transpose() * response;
  double ridge = options.ridge;
  Eigen::VectorXd beta;
  for (int attempt = 0;; ++attempt) {
    Eigen::MatrixXd regularized = gram;
    for (std::size_t j = 1; j <= d; ++j) regularized(j, j) += ridge;
    Eigen::LDLT<Eigen::MatrixXd> solver(regularized);
    const bool ok = solver.info() == Eigen::Success && solver.isPositive() &&
                    solver.vectorD().minCoeff() > 1e-12 * std::max(1.0, gram.trace());
    if (ok) {
      beta = solver.solve(rhs);
      if (beta.allFinite()) break;
    }
    if (attempt >= 8) throw NumericError("lime_local: normal equations stayed singular");
    ridge = ridge > 0.0 ? ridge * 10.0 : 1e-6;
    std::cerr << "warning: lime_local normal equations singular; increasing ridge to " << ridge
              << '\n';
  }

  Explanation e;
  e.method = "lime";
  e.attributions.resize(d);
  for (std::size_t j = 0; j < d; ++j) e.attributions[j] = beta(static_cast<Eigen::Index>(j + 1));
  e.target_class = target;
  e.seed = seed;
  e.latency_ms = elapsed_ms(start);
  return e;
}

Explanation permutation_importance(const BlackBox& f, const Dataset& data, std::uint64_t seed,
                                   const PermutationOptions& options) {
  const auto start = Clock::now();
  if (data.num_rows == 0) throw ValidationError("permutation_importance: dataset is empty");
  if (data.num_features != f.num_features) {
    throw DimensionError("permutation_importance: dataset has " +
                         std::to_string(data.num_features) + " features, model takes " +
                         std::to_string(f.num_features));
  }
  if (options.repeats == 0) throw ParameterError("permutation_importance: repeats must be >= 1");
  const std::size_t n = data.num_rows, d = data.num_features;
  Rng rng(seed);

  auto accuracy_of = [&](const std::vector<double>& table) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> row(&table[i * d], d);
      if (argmax(f(row)) == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
  };

  const double reference = accuracy_of(data.features);
  Explanation e;
  e.method = "permutation";
  e.attributions.assign(d, 0.0);
  std::vector<double> table = data.features;
  for (std::size_t j = 0; j < d; ++j) {
    double drop = 0.0;
    for (std::size_t r = 0; r < options.repeats; ++r) {
      const std::vector<std::size_t> order = rng.permutation(n);
      for (std::size_t i = 0; i < n; ++i) table[i * d + j] = data.features[order[i] * d + j];
      drop += reference - accuracy_of(table);
    }
    for (std::size_t i = 0; i < n; ++i) table[i * d + j] = data.features[i * d + j];
    e.attributions[j] = drop / static_cast<double>(options.repeats);
  }
  e.seed = seed;
  e.latency_ms = elapsed_ms(start);
  return e;
}

const std::vector<std::string>& explainer_methods() {
  static const std::vector<std::string> methods{"interpretcc", "shapley_exact", "shapley_sampled",
                                                "lime", "permutation"};
  return methods;
}

ExplainFn make_explainer(const ExplainerConfig& config, const BlackBox& f,
                         std::vector<double> baseline, const Dataset* reference,
                         const GatedModel* intrinsic) {
  if (baseline.size() != f.num_features) {
    throw DimensionError("make_explainer: baseline length does not match the model");
  }
  const std::string& m = config.method;
  if (m == "interpretcc") {
    if (intrinsic == nullptr) {
      throw ValidationError("method 'interpretcc' needs an interpretable (gated) model checkpoint");
    }
    return [intrinsic](std::span<const double> x, std::uint64_t) { return intrinsic->explain(x); };
  }
  if (m == "shapley_exact") {
    if (f.num_features > kMaxExactShapleyFeatures) {
      throw ParameterError("shapley_exact: " + std::to_string(f.num_features) +
                           " features exceed the exact limit of " +
                           std::to_string(kMaxExactShapleyFeatures) +
                           "; use shapley_sampled instead");
    }
    return [f, baseline](std::span<const double> x, std::uint64_t) {
      return shapley_exact(f, x, baseline);
    };
  }
  if (m == "shapley_sampled") {
    const std::size_t n = config.n_permutations;
    return [f, baseline, n](std::span<const double> x, std::uint64_t seed) {
      return shapley_sampled(f, x, baseline, n, seed);
    };
  }
  if (m == "lime") {
    const LimeOptions options = config.lime;
    return [f, options](std::span<const double> x, std::uint64_t seed) {
      return lime_local(f, x, options, seed);
    };
  }
  if (m == "permutation") {
    if (reference == nullptr) {
      throw ValidationError("method 'permutation' needs a labeled reference dataset");
    }
    const PermutationOptions options = config.permutation;
    return [f, reference, options](std::span<const double>, std::uint64_t seed) {
      return permutation_importance(f, *reference, seed, options);
    };
  }
  std::string valid;
  for (const auto& name : explainer_methods()) valid += (valid.empty() ? "" : ", ") + name;
  throw ValidationError("unknown explanation method '" + m + "' (valid: " + valid + ")");
}

}  // namespace glassbox
