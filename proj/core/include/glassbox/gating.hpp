#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "glassbox/rng.hpp"
#include "glassbox/tensor.hpp"
#include "json.hpp"

namespace glassbox {

enum class MaskMode {
  // Gumbel-sigmoid sample; forward value is the hard selection, backward
  // follows the relaxed sample (straight-through).
  kTrainSoft,
  // Gumbel-sigmoid sample used as-is on both passes (no hard values).
  // Useful for gradient checking the relaxed objective.
  kTrainRelaxed,
  // Deterministic binary selection from the clean scores; no randomness.
  kInferenceHard,
};

std::string to_string(MaskMode mode);

// Overflow-safe logistic function; the single definition of a gate score.
double gate_score(double logit);

struct SelectionMode {
  enum class Kind { kThreshold, kTopK };
  Kind kind = Kind::kThreshold;
  std::size_t k = 0;  // top-k only

  static SelectionMode threshold() { return {Kind::kThreshold, 0}; }
  static SelectionMode top_k(std::size_t k) { return {Kind::kTopK, k}; }
  bool operator==(const SelectionMode&) const = default;
};

struct GateConfig {
  double sparsity_coefficient = 0.0;  // lambda
  double temperature_start = 5.0;
  double temperature_end = 0.5;
  double anneal_rate = 0.95;
  SelectionMode selection = SelectionMode::threshold();

  // Throws ParameterError when an invariant fails; `num_units` bounds top-k.
  void validate(std::size_t num_units) const;
  // max(temperature_end, temperature_start * anneal_rate^epoch)
  double temperature_at(std::size_t epoch) const;

  nlohmann::json to_json() const;
  static GateConfig from_json(const nlohmann::json& j);
  bool operator==(const GateConfig&) const = default;
};

struct RoutingDecision {
  std::vector<double> scores;  // sigmoid of the router logits, in [0, 1]
  std::vector<bool> active;
  MaskMode mode = MaskMode::kInferenceHard;

  std::size_t num_active() const;
  bool operator==(const RoutingDecision&) const = default;
};

// Clean-score selection used at inference. Threshold mode activates every unit
// with score >= 0.5 and falls back to the arg-max unit when none clears it;
// top-k keeps the k highest scores, ties going to the lower index.
std::vector<bool> select_active(std::span<const double> scores, const SelectionMode& selection);

// Per-unit hard concrete mask over Bernoulli probabilities in (0, 1) with
// threshold semantics. kInferenceHard returns exactly {0, 1} (p >= 0.5) and
// ignores `rng`; the training modes draw one logistic variate per unit.
Tensor hard_mask(const Tensor& probabilities, double temperature, Rng* rng, MaskMode mode);

// Batched gate over router logits [batch, units] with the configured selection
// rule applied row-wise (including the non-empty fallback). The noise used in
// the training modes is exposed through `noise_out` when non-null.
Tensor gate_sample(const Tensor& logits, double temperature, Rng* rng, MaskMode mode,
                   const SelectionMode& selection, std::vector<double>* noise_out = nullptr);

// lambda * mean(scores): expected-L0 surrogate for threshold gating.
Tensor sparsity_penalty(const Tensor& scores, double lambda);
double sparsity_penalty(std::span<const double> scores, double lambda);

}  // namespace glassbox
