#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tbnorm/data.hpp"
#include "tbnorm/memory.hpp"
#include "tbnorm/model.hpp"
#include "tbnorm/rng.hpp"

namespace tbnorm {

struct TrainConfig {
  double learning_rate = 0.05;
  double weight_decay = 1e-4;
  std::size_t epochs = 30;
  std::size_t batch_current = 48;
  std::size_t batch_exemplar = 16;
  std::uint64_t seed = 1;
  NormKind norm = NormKind::bn;
  std::size_t groups = 4;
  AblationFlags ablation{};
  bool bessel = false;
  /// 4% of the default stream's training rows.
  std::size_t memory_capacity = 96;
  /// Epochs of the affine-retraining oracle.
  std::size_t oracle_epochs = 10;

  bool operator==(const TrainConfig&) const = default;
};

/// Model spec for a stream's inputs under a training configuration: the
/// default MLP for flat inputs, the conv variant for images.
ModelSpec model_spec_for(const TaskStream& stream, const TrainConfig& cfg,
                         std::vector<std::size_t> hidden = {});

struct LossResult {
  double loss = 0.0;
  Tensor dlogits;
};

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. logits.
/// Throws NumericError on a non-finite loss.
LossResult softmax_cross_entropy(const Tensor& logits,
                                 const std::vector<std::size_t>& labels);

/// One plain SGD step (grad + weight_decay * value) on the selected roles.
void sgd_step(TinyModel& model, double lr, double weight_decay,
              bool norm_affine_only = false);

struct EpochLog {
  std::size_t steps = 0;
  double mean_loss = 0.0;
};

/// Fine-tunes on task t: each epoch walks a permutation of the task's train
/// set in chunks of B_c (dropping a trailing partial chunk), appending B_p
/// memory rows from task 2 on. The head must already have C_t outputs.
std::vector<EpochLog> train_task(TinyModel& model, const TaskStream& stream,
                                 std::size_t t, const ExemplarMemory& memory,
                                 const TrainConfig& cfg, Rng& rng);

/// Argmax class per row, evaluated with running statistics.
std::vector<std::size_t> predict(TinyModel& model, const Dataset& data);

double accuracy(TinyModel& model, const Dataset& data);

/// Test accuracy on tasks 1..upto.
std::vector<double> evaluate(TinyModel& model, const TaskStream& stream,
                             std::size_t upto);

/// Replaces every normalization layer's running mean and variance with the
/// exact mean and biased variance of its input over `data`, layer by layer
/// with upstream layers already updated. Nothing else changes.
void oracle_recompute_stats(TinyModel& model, const Dataset& data);

/// Retrains only gamma/beta of every normalization layer by SGD on `data`
/// with running statistics held fixed.
void oracle_retrain_affine(TinyModel& model, const Dataset& data,
                           const TrainConfig& cfg, Rng& rng);

/// Single model trained on the union of all tasks' training data.
TinyModel train_joint(const TaskStream& stream, const TrainConfig& cfg);

}  // namespace tbnorm
