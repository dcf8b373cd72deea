#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tbnorm/tensor.hpp"

namespace tbnorm {

/// Labeled samples; row b of `x` carries label `labels[b]`.
struct Dataset {
  Tensor x;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  /// Per-sample shape (n = 1).
  Shape sample_shape() const { return {1, x.c(), x.h(), x.w()}; }
};

Dataset subset(const Dataset& d, std::span<const std::size_t> rows);
Dataset concat(const Dataset& a, const Dataset& b);

struct Task {
  Dataset train;
  Dataset test;
  /// Global class ids introduced by this task.
  std::vector<std::size_t> classes;
};

/// Sequence of tasks with disjoint class sets; task t (1-based) owns classes
/// m*(t-1) .. m*t-1.
struct TaskStream {
  std::vector<Task> tasks;
  std::size_t classes_per_task = 0;

  std::size_t size() const { return tasks.size(); }
  std::size_t classes_seen(std::size_t t) const { return classes_per_task * t; }
  /// 1-based task index owning a class.
  std::size_t task_of_class(std::size_t cls) const {
    return cls / classes_per_task + 1;
  }
  const Task& task(std::size_t t) const { return tasks.at(t - 1); }
  Shape sample_shape() const { return tasks.at(0).train.sample_shape(); }

  /// Train (or test) data of tasks 1..upto concatenated.
  Dataset train_upto(std::size_t upto) const;
  Dataset test_upto(std::size_t upto) const;
};

struct SyntheticConfig {
  std::size_t tasks = 5;
  std::size_t classes_per_task = 2;
  std::size_t dim = 16;
  std::size_t samples_per_class = 300;
  /// Half edge of the hypercube holding the class means.
  double scale = 1.0;
  /// Isotropic per-class standard deviation; 1.2 puts the Bayes accuracy of
  /// the default 10-class stream near 0.9.
  double noise = 1.2;
  /// Dimensions whose mean sign is shared by all classes of a task.
  std::size_t task_dims = 8;
  double train_fraction = 0.8;

  bool operator==(const SyntheticConfig&) const = default;
};

/// Per-class Gaussians with means on vertices of [-scale, scale]^dim. The
/// first `task_dims` coordinates of every class mean follow a per-task sign
/// pattern; the remaining ones are drawn per class. Rows are (N, dim, 1, 1).
TaskStream make_synthetic_stream(const SyntheticConfig& cfg, std::uint64_t seed);

/// Class means used by make_synthetic_stream for the same arguments.
std::vector<std::vector<double>> synthetic_class_means(const SyntheticConfig& cfg,
                                                       std::uint64_t seed);

// IDX files: big-endian magic 0x00000803 (u8 images) or 0x00000801 (u8
// labels), then one big-endian u32 per dimension, then row-major bytes.

/// Images as (N, 1, rows, cols) scaled to [0, 1].
Tensor load_idx_images(const std::filesystem::path& path);
std::vector<std::size_t> load_idx_labels(const std::filesystem::path& path);

void write_idx_images(const std::filesystem::path& path,
                      std::span<const std::uint8_t> pixels, std::size_t count,
                      std::size_t rows, std::size_t cols);
void write_idx_labels(const std::filesystem::path& path,
                      std::span<const std::uint8_t> labels);

/// Groups contiguous labels into tasks of m classes: task t holds labels
/// m*(t-1) .. m*t-1. Classes beyond the last full task are dropped.
TaskStream make_label_stream(const Dataset& train, const Dataset& test,
                             std::size_t classes_per_task);

}  // namespace tbnorm
