#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "tbnorm/data.hpp"
#include "tbnorm/norm.hpp"
#include "tbnorm/rng.hpp"

namespace tbnorm {

/// Fixed-capacity, class-balanced replay buffer.
class ExemplarMemory {
 public:
  explicit ExemplarMemory(std::size_t capacity) : capacity_(capacity) {}

  /// Called after finishing a task. With `classes_seen` = C_t the quota
  /// becomes floor(capacity / C_t); stored classes are randomly down-sampled
  /// to it and the classes of `task_data` are filled up to it (never with
  /// duplicates).
  void update(const Dataset& task_data, std::size_t classes_seen, Rng& rng);

  std::size_t capacity() const { return capacity_; }
  std::size_t quota() const { return quota_; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::size_t count(std::size_t cls) const;
  std::vector<std::size_t> classes() const;

  /// Stored samples, classes in ascending order.
  const Dataset& data() const { return flat_; }

 private:
  void rebuild();

  std::size_t capacity_;
  std::size_t quota_ = 0;
  std::map<std::size_t, Dataset> per_class_;
  Dataset flat_;
};

/// A mini-batch of `comp.current` current-task rows followed by
/// `comp.exemplar` memory rows.
struct TaskBatch {
  Tensor x;
  std::vector<std::size_t> labels;
  BatchComposition comp;
};

/// Current rows are `current_rows` of `current`; exemplar rows are drawn
/// from memory without replacement (with replacement if memory holds fewer
/// than `exemplar` samples). At task 1 no exemplar rows are drawn.
TaskBatch compose_batch(const Dataset& current,
                        std::span<const std::size_t> current_rows,
                        const ExemplarMemory& memory, std::size_t exemplar,
                        std::size_t task, Rng& rng);

/// Samples B_c current rows uniformly without replacement.
TaskBatch compose_batch(const Dataset& current, const ExemplarMemory& memory,
                        std::size_t batch_current, std::size_t batch_exemplar,
                        std::size_t task, Rng& rng);

}  // namespace tbnorm
