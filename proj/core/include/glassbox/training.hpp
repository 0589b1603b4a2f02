#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "glassbox/data.hpp"
#include "glassbox/error.hpp"
#include "glassbox/interpretcc.hpp"
#include "glassbox/model.hpp"
#include "glassbox/optim.hpp"
#include "json.hpp"

namespace glassbox {

struct EpochRecord {
  std::size_t epoch = 0;
  double temperature = 0.0;
  double loss = 0.0;          // mean minibatch objective
  double accuracy = 0.0;      // training accuracy at inference settings
  double mean_active = 0.0;   // mean inference active-unit count (gated models)
};

struct TrainingTrace {
  std::vector<EpochRecord> epochs;
  nlohmann::json to_json() const;
};

struct TrainOptions {
  std::size_t batch_size = 64;
  double learning_rate = 1e-2;
  OptimizerKind optimizer = OptimizerKind::kAdam;
};

// Raised when the objective stops being finite. Parameters are restored to the
// end of `last_good_epoch` (or the initial values when it is -1).
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, long last_good_epoch)
      : NumericError(what), last_good_epoch_(last_good_epoch) {}
  long last_good_epoch() const { return last_good_epoch_; }

 private:
  long last_good_epoch_;
};

// Minimizes cross-entropy + sparsity_penalty(scores, lambda) with straight-through
// Gumbel-sigmoid gates, annealing the temperature per epoch. Deterministic given
// the rng state. Zero epochs leave the model untouched and the trace empty.
TrainingTrace train(GatedModel& model, const Dataset& data, std::size_t epochs,
                    const GateConfig& gate, Rng& rng, const TrainOptions& options = {});

TrainingTrace fit_classifier(MlpClassifier& model, const Dataset& data, std::size_t epochs,
                             Rng& rng, const TrainOptions& options = {});

double accuracy(const Model& model, const Dataset& data);
double mean_active_units(const GatedModel& model, const Dataset& data);

}  // namespace glassbox
