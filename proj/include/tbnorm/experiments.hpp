#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tbnorm/config.hpp"
#include "tbnorm/metrics.hpp"
#include "tbnorm/model.hpp"

namespace tbnorm {

// ---------------------------------------------------------------------------
// Gaussian toy: 20-dim vectors made of 10 i.i.d. copies of a 2-D Gaussian
// whose mean depends on the task. Task 4 supplies B_c rows per batch and a
// fixed memory of tasks 1-3 supplies B_p rows.

struct ToyOptions {
  std::size_t batches = 2000;
  std::size_t batch_current = 48;
  std::size_t batch_exemplar = 16;
  std::size_t groups = 4;
  std::size_t memory_per_task = 100;
  std::size_t test_per_task = 250;
  /// All four tasks share one mean (no imbalance signal).
  bool equal_means = false;
  std::uint64_t seed = 1;
};

struct ToyPoint {
  std::string layer;
  std::size_t task = 0;
  double x0 = 0.0;
  double x1 = 0.0;
};

struct ToyReport {
  std::uint64_t seed = 0;
  /// |running - population| per dimension. CN is compared against the
  /// population statistics of its group-normalized input.
  std::vector<double> bn_mean_dev, tbbn_mean_dev, cn_mean_dev;
  std::vector<double> bn_var_dev, tbbn_var_dev, cn_var_dev;
  /// Dimensions where TBBN's mean deviation is below BN's.
  std::size_t tbbn_better_dims = 0;
  /// Largest |mean| of any (sample, group) slice of the CN group stage on the
  /// balanced test set.
  double cn_max_group_mean = 0.0;
  std::vector<ToyPoint> cloud;
};

/// The 2-D mean of task `task` (1..4).
std::vector<double> toy_task_mean(std::size_t task, bool equal_means);
ToyReport exp_toy_gaussian(const ToyOptions& opt);

// ---------------------------------------------------------------------------
// Mean bias of BN on composed batches: task i has unit-variance rows around
// mean i; the current task t fills B_c rows and B_p rows come from tasks
// 1..t-1 chosen uniformly.

struct BiasRow {
  std::size_t bc = 0;
  std::size_t bp = 0;
  std::size_t t = 0;
  /// mu* - E[mu_BN] from the closed form.
  double derived = 0.0;
  /// The same quantity with the sign it is commonly printed with.
  double printed = 0.0;
  /// mu* - mean of the measured batch means.
  double measured = 0.0;
  double std_error = 0.0;
};

BiasRow measure_bn_mean_gap(std::size_t bc, std::size_t bp, std::size_t t,
                            std::size_t batches, std::uint64_t seed);

struct BiasOptions {
  std::size_t batch = 64;
  std::vector<std::size_t> tasks{2, 4, 8};
  std::vector<std::size_t> current{8, 16, 24, 32, 40, 48, 56};
  std::size_t batches = 100000;
  std::uint64_t seed = 1;
};

std::vector<BiasRow> exp_bias_check(const BiasOptions& opt);

// ---------------------------------------------------------------------------
// Class-incremental runs.

struct MetricSet {
  double final_accuracy = 0.0;
  double average_accuracy = 0.0;
  double forgetting = 0.0;
  double learning_accuracy = 0.0;
};

MetricSet compute_metrics(const AccuracyMatrix& a);

struct CilOutcome {
  AccuracyMatrix matrix;
  MisclassCounts taxonomy;
  TinyModel model;
};

/// Fine-tuning with exemplar replay over the whole stream: grow head, train,
/// evaluate, update memory, for t = 1..T.
CilOutcome run_cil(const TaskStream& stream, const TrainConfig& cfg);

/// Synthetic stream for `seed`, or the IDX stream when cfg.idx_dir is set.
TaskStream make_stream(const RunConfig& cfg, std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  AccuracyMatrix matrix;
  MetricSet metrics;
  MisclassCounts taxonomy;
};

struct CilReport {
  std::vector<SeedResult> runs;
  MetricSet mean;
  MisclassCounts total;
  /// 1 / (number of classes after the last task).
  double chance = 0.0;
};

CilReport exp_cil_run(const RunConfig& cfg);

struct AblationRow {
  std::string name;
  NormKind norm = NormKind::tbbn;
  AblationFlags flags{};
  CilReport report;
};

/// TBBN, Cases 1-4 and BN on the same seeds.
std::vector<AblationRow> exp_ablation(const RunConfig& cfg);

struct OracleSeed {
  std::uint64_t seed = 0;
  /// Final per-task test accuracies.
  std::vector<double> ft, stats_only, stats_affine, joint;
};

struct OracleReport {
  std::vector<OracleSeed> runs;
  double ft = 0.0, stats_only = 0.0, stats_affine = 0.0, joint = 0.0;
};

/// FT+BN, then the statistics oracle, then the affine oracle on top, plus a
/// jointly trained model. With `checkpoint_dir` set, the FT model passes
/// through a checkpoint file before the oracles run.
OracleReport exp_oracle(const RunConfig& cfg,
                        const std::filesystem::path& checkpoint_dir = {});

// ---------------------------------------------------------------------------

/// Runs cfg.experiment and writes its files under cfg.out. Returns a summary.
nlohmann::json run_experiment(const RunConfig& cfg);

/// Calls f(i) for i in [0, n) on up to `threads` worker threads (0 = hardware
/// concurrency). Exceptions propagate after all workers finish.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& f);

/// %.17g
std::string format_double(double v);

}  // namespace tbnorm
