#include "glassbox/training.hpp"

#include <cmath>
#include <numeric>

#include "glassbox/ops.hpp"

namespace glassbox {
namespace {

std::vector<std::size_t> labels_of(const Dataset& data, std::span<const std::size_t> rows) {
  std::vector<std::size_t> y;
  y.reserve(rows.size());
  for (std::size_t r : rows) y.push_back(data.labels[r]);
  return y;
}

void check_dataset(const Model& model, const Dataset& data) {
  data.validate();
  if (data.num_features != model.num_features()) {
    throw DimensionError("dataset has " + std::to_string(data.num_features) +
                         " features, model expects " + std::to_string(model.num_features()));
  }
  for (std::size_t y : data.labels) {
    if (y >= model.num_classes()) {
      throw IndexError("label " + std::to_string(y) + " out of range for " +
                       std::to_string(model.num_classes()) + " classes");
    }
  }
}

// Shared epoch loop; `batch_loss` builds the objective for one minibatch.
template <typename BatchLoss, typename EpochEnd>
TrainingTrace run_epochs(Model& model, const Dataset& data, std::size_t epochs, Rng& rng,
                         const TrainOptions& options, BatchLoss&& batch_loss,
                         EpochEnd&& epoch_end) {
  TrainingTrace trace;
  if (epochs == 0) return trace;
  check_dataset(model, data);
  if (options.batch_size == 0) throw ParameterError("batch size must be positive");

  std::vector<Tensor> params = model.parameters();
  OptimizerState opt = options.optimizer == OptimizerKind::kAdam
                           ? OptimizerState::adam(options.learning_rate)
                           : OptimizerState::sgd(options.learning_rate);
  auto last_good = parameter_values(model);
  long last_good_epoch = -1;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::size_t> order = rng.permutation(data.num_rows);
    double total = 0.0;
    std::size_t batches = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
        const std::size_t stop = std::min(order.size(), start + options.batch_size);
        std::span<const std::size_t> rows(order.data() + start, stop - start);
        Tensor objective = batch_loss(epoch, rows);
        objective.backward();
        optimizer_step(opt, params);
        total += objective.item();
        ++batches;
      }
    } catch (const NumericError& e) {
      load_parameters(model, last_good);
      throw TrainingDiverged("training diverged in epoch " + std::to_string(epoch) + ": " +
                                 e.what() + "; parameters restored to epoch " +
                                 std::to_string(last_good_epoch),
                             last_good_epoch);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.loss = total / static_cast<double>(batches);
    epoch_end(epoch, record);
    trace.epochs.push_back(record);
    last_good = parameter_values(model);
    last_good_epoch = static_cast<long>(epoch);
  }
  return trace;
}

}  // namespace

nlohmann::json TrainingTrace::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"temperature", e.temperature},
                    {"loss", e.loss},
                    {"accuracy", e.accuracy},
                    {"mean_active", e.mean_active}});
  }
  return {{"epochs", rows}};
}

double accuracy(const Model& model, const Dataset& data) {
  if (data.num_rows == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.num_rows; ++i) {
    if (argmax(model.predict_proba(data.row(i))) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.num_rows);
}

double mean_active_units(const GatedModel& model, const Dataset& data) {
  if (data.num_rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < data.num_rows; ++i) {
    total += static_cast<double>(model.route(data.row(i)).num_active());
  }
  return total / static_cast<double>(data.num_rows);
}

TrainingTrace train(GatedModel& model, const Dataset& data, std::size_t epochs,
                    const GateConfig& gate, Rng& rng, const TrainOptions& options) {
  model.set_gate_config(gate);
  return run_epochs(
      model, data, epochs, rng, options,
      [&](std::size_t epoch, std::span<const std::size_t> rows) {
        const double temperature = gate.temperature_at(epoch);
        GatedForward fwd =
            model.forward_batch(data.batch(rows), MaskMode::kTrainSoft, temperature, &rng);
        Tensor task = cross_entropy_with_logits(fwd.logits, labels_of(data, rows));
        if (gate.sparsity_coefficient == 0.0) return task;
        return add(task, sparsity_penalty(fwd.scores, gate.sparsity_coefficient));
      },
      [&](std::size_t epoch, EpochRecord& record) {
        record.temperature = gate.temperature_at(epoch);
        std::size_t correct = 0;
        double active = 0.0;
        for (std::size_t i = 0; i < data.num_rows; ++i) {
          GatedPrediction p = model.predict(data.row(i));
          if (argmax(p.probabilities) == data.labels[i]) ++correct;
          active += static_cast<double>(p.decision.num_active());
        }
        record.accuracy = static_cast<double>(correct) / static_cast<double>(data.num_rows);
        record.mean_active = active / static_cast<double>(data.num_rows);
      });
}

TrainingTrace fit_classifier(MlpClassifier& model, const Dataset& data, std::size_t epochs,
                             Rng& rng, const TrainOptions& options) {
  return run_epochs(
      model, data, epochs, rng, options,
      [&](std::size_t, std::span<const std::size_t> rows) {
        return cross_entropy_with_logits(model.logits(data.batch(rows)), labels_of(data, rows));
      },
      [&](std::size_t, EpochRecord& record) { record.accuracy = accuracy(model, data); });
}

}  // namespace glassbox
