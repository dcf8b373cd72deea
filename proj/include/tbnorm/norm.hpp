#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tbnorm/tensor.hpp"

namespace tbnorm {

enum class NormKind { bn, gn, cn, tbbn };

/// Accepts "bn", "gn", "cn" or "tbbn"; throws ConfigError otherwise.
NormKind parse_norm_kind(const std::string& name);
std::string to_string(NormKind kind);

/// Toggles for the three task-balanced components of TBBN.
///
/// balanced_stats_train: normalize with statistics of the balanced batch
///   (otherwise with the plain per-channel statistics of the input).
/// balanced_stats_test: feed the running averages with split-averaged balanced
///   statistics (otherwise with the plain batch statistics).
/// balanced_affine: normalize and affine-transform inside the balanced layout
///   and un-balance afterwards (otherwise the input is normalized in its
///   original layout with the split-averaged statistics).
struct AblationFlags {
  bool balanced_stats_train = true;
  bool balanced_stats_test = true;
  bool balanced_affine = true;

  static constexpr AblationFlags full() { return {true, true, true}; }
  static constexpr AblationFlags vanilla() { return {false, false, false}; }

  /// Ablation cases 1..4: (F,T,T), (T,F,T), (T,T,F), (F,F,T).
  static AblationFlags ablation_case(int index);

  bool operator==(const AblationFlags&) const = default;
};

/// Learnable parameters, running statistics and hyperparameters of one
/// normalization layer over C channels.
struct NormLayerState {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;
  /// Weight of the fresh batch statistic in the moving average.
  double momentum = 0.1;
  /// Multiply the previous running variance by (V-1)/V before blending.
  bool bessel_on_running_var = false;
  std::size_t groups = 1;
  AblationFlags ablation{};

  NormLayerState() = default;
  explicit NormLayerState(std::size_t channels);

  std::size_t channels() const { return gamma.size(); }
};

/// Layout of a composed mini-batch: `current` rows of the current task
/// followed by `exemplar` rows drawn from memory, during task `task` (1-based).
struct BatchComposition {
  std::size_t current = 0;
  std::size_t exemplar = 0;
  std::size_t task = 1;

  std::size_t total() const { return current + exemplar; }
};

struct NormGrads {
  Tensor dx;
  std::vector<double> dgamma;
  std::vector<double> dbeta;
};

// Backward caches. Each is produced by one train-forward call and may be
// consumed by exactly one backward call; a second backward throws
// std::logic_error.

class BnCache {
 public:
  bool consumed() const { return consumed_; }

 private:
  friend std::pair<Tensor, BnCache> bn_forward_train(const Tensor&,
                                                     NormLayerState&);
  friend NormGrads bn_backward(const Tensor&, BnCache&, const NormLayerState&);
  friend class TbbnCache;

  Tensor x_;
  Tensor xhat_;
  std::vector<double> mean_;
  std::vector<double> inv_std_;
  bool consumed_ = false;
};

class GnCache {
 public:
  bool consumed() const { return consumed_; }
  std::size_t groups() const { return groups_; }

 private:
  friend std::pair<Tensor, GnCache> gn_forward_train(const Tensor&,
                                                     std::size_t, double);
  friend Tensor gn_backward(const Tensor&, GnCache&);

  Tensor xhat_;
  std::vector<double> inv_std_;  // per (sample, group)
  std::size_t groups_ = 1;
  bool consumed_ = false;
};

class CnCache {
 public:
  bool consumed() const { return consumed_; }

 private:
  friend std::pair<Tensor, CnCache> cn_forward_train(const Tensor&,
                                                     NormLayerState&);
  friend NormGrads cn_backward(const Tensor&, CnCache&, const NormLayerState&);

  GnCache gn_;
  BnCache bn_;
  bool consumed_ = false;
};

/// Cache for the GroupNorm layer with per-channel affine.
class GnAffineCache {
 public:
  bool consumed() const { return consumed_; }

 private:
  friend std::pair<Tensor, GnAffineCache> group_norm_forward_train(
      const Tensor&, const NormLayerState&);
  friend NormGrads group_norm_backward(const Tensor&, GnAffineCache&,
                                       const NormLayerState&);

  GnCache gn_;
  Tensor xhat_;
  bool consumed_ = false;
};

class TbbnCache {
 public:
  bool consumed() const { return consumed_; }
  /// Split factor actually used (after the common-divisor correction).
  std::size_t split_factor() const { return r_; }
  /// Balanced-batch statistics (length C*r) when they were computed.
  const ChannelStats& balanced_stats() const { return balanced_; }

 private:
  friend std::pair<Tensor, TbbnCache> tbbn_forward_train(
      const Tensor&, const BatchComposition&, NormLayerState&);
  friend NormGrads tbbn_backward(const Tensor&, TbbnCache&,
                                 const NormLayerState&);

  std::optional<BnCache> vanilla_;  // empty memory with t >= 2
  std::size_t r_ = 1;
  std::size_t current_ = 0;
  AblationFlags flags_{};
  Tensor x_;
  Tensor h_;             // balanced batch (B_c/r + B_p, C*r, H, W)
  Tensor normalized_;    // h-hat (balanced layout) or x-hat (original layout)
  ChannelStats balanced_;
  ChannelStats plain_;
  std::vector<double> norm_mean_;     // statistics actually used to normalize
  std::vector<double> norm_inv_std_;
  bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Split factor.

/// Split factor that equalizes per-task row counts: 1 for the first task,
/// otherwise B_c * (t - 1) / B_p, which must be integral.
std::size_t compute_r(std::size_t current, std::size_t exemplar,
                      std::size_t task);

/// r if it divides both batch parts, otherwise the largest common divisor
/// of the two that is below r.
std::size_t feasible_r(std::size_t current, std::size_t exemplar,
                       std::size_t r);

// ---------------------------------------------------------------------------
// Batch normalization.

std::pair<Tensor, BnCache> bn_forward_train(const Tensor& x,
                                            NormLayerState& state);
Tensor bn_forward_eval(const Tensor& x, const NormLayerState& state);
NormGrads bn_backward(const Tensor& dy, BnCache& cache,
                      const NormLayerState& state);

/// Gradients of the eval-mode map (running statistics held fixed).
NormGrads bn_backward_eval(const Tensor& x, const Tensor& dy,
                           const NormLayerState& state);

// ---------------------------------------------------------------------------
// Group normalization stage (no affine). Each (sample, group) slice of
// C/G channels x H x W values is standardized independently.

std::pair<Tensor, GnCache> gn_forward_train(const Tensor& x,
                                            std::size_t groups,
                                            double epsilon);
Tensor gn_forward(const Tensor& x, std::size_t groups, double epsilon);
Tensor gn_backward(const Tensor& dy, GnCache& cache);

/// GroupNorm layer: the stage above followed by a per-channel affine.
std::pair<Tensor, GnAffineCache> group_norm_forward_train(
    const Tensor& x, const NormLayerState& state);
Tensor group_norm_forward_eval(const Tensor& x, const NormLayerState& state);
NormGrads group_norm_backward(const Tensor& dy, GnAffineCache& cache,
                              const NormLayerState& state);

// ---------------------------------------------------------------------------
// Continual normalization: group normalization followed by batch
// normalization, which owns the affine parameters and running statistics.

std::pair<Tensor, CnCache> cn_forward_train(const Tensor& x,
                                            NormLayerState& state);
Tensor cn_forward_eval(const Tensor& x, const NormLayerState& state);
NormGrads cn_backward(const Tensor& dy, CnCache& cache,
                      const NormLayerState& state);

// ---------------------------------------------------------------------------
// Task-balanced batch normalization.

/// Train-mode forward over a batch whose first `comp.current` rows come from
/// the current task. Updates the running statistics of `state`.
std::pair<Tensor, TbbnCache> tbbn_forward_train(const Tensor& x,
                                                const BatchComposition& comp,
                                                NormLayerState& state);

/// Identical to bn_forward_eval.
Tensor tbbn_forward_eval(const Tensor& x, const NormLayerState& state);

NormGrads tbbn_backward(const Tensor& dy, TbbnCache& cache,
                        const NormLayerState& state);

// ---------------------------------------------------------------------------

/// Expected gap between the uniform task mean and the batch mean BN computes
/// on a composed batch.
struct MeanBias {
  /// mu* - E[mu_BN], derived directly.
  std::vector<double> derived;
  /// The closed form as commonly printed; equal to -derived.
  std::vector<double> printed;
};

/// task_means[i] is the population mean (length C) of task i+1 and must hold
/// exactly `task` entries; requires task >= 2.
MeanBias expected_bn_mean_bias(const std::vector<std::vector<double>>& task_means,
                               std::size_t current, std::size_t exemplar,
                               std::size_t task);

}  // namespace tbnorm
