#include "tbnorm/memory.hpp"

#include <algorithm>
#include <stdexcept>

namespace tbnorm {

void ExemplarMemory::update(const Dataset& task_data, std::size_t classes_seen,
                            Rng& rng) {
  if (classes_seen == 0) throw std::invalid_argument("memory update: no classes seen");
  quota_ = capacity_ / classes_seen;

  for (auto& [cls, samples] : per_class_) {
    if (samples.size() > quota_) {
      auto keep = rng.sample_without_replacement(samples.size(), quota_);
      std::sort(keep.begin(), keep.end());
      samples = subset(samples, keep);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> rows_by_class;
  for (std::size_t i = 0; i < task_data.size(); ++i) {
    rows_by_class[task_data.labels[i]].push_back(i);
  }
  for (const auto& [cls, rows] : rows_by_class) {
    const std::size_t take = std::min(rows.size(), quota_);
    auto pick = rng.sample_without_replacement(rows.size(), take);
    std::sort(pick.begin(), pick.end());
    std::vector<std::size_t> chosen;
    chosen.reserve(take);
    for (auto p : pick) chosen.push_back(rows[p]);
    per_class_[cls] = subset(task_data, chosen);
  }
  rebuild();
  if (size() > capacity_) throw std::logic_error("memory exceeds capacity");
}

std::size_t ExemplarMemory::size() const { return flat_.size(); }

std::size_t ExemplarMemory::count(std::size_t cls) const {
  auto it = per_class_.find(cls);
  return it == per_class_.end() ? 0 : it->second.size();
}

std::vector<std::size_t> ExemplarMemory::classes() const {
  std::vector<std::size_t> out;
  for (const auto& [cls, samples] : per_class_) {
    if (!samples.empty()) out.push_back(cls);
  }
  return out;
}

void ExemplarMemory::rebuild() {
  flat_ = Dataset{};
  for (const auto& [cls, samples] : per_class_) flat_ = concat(flat_, samples);
}

TaskBatch compose_batch(const Dataset& current,
                        std::span<const std::size_t> current_rows,
                        const ExemplarMemory& memory, std::size_t exemplar,
                        std::size_t task, Rng& rng) {
  if (current.empty() || current_rows.empty()) {
    throw std::invalid_argument("compose_batch: empty current-task source");
  }
  const std::size_t bp = task <= 1 ? 0 : exemplar;
  if (bp > 0 && memory.empty()) {
    throw std::invalid_argument("compose_batch: empty memory at task " +
                                std::to_string(task));
  }
  Dataset head = subset(current, current_rows);
  TaskBatch batch;
  batch.comp = {current_rows.size(), bp, task};
  if (bp == 0) {
    batch.x = std::move(head.x);
    batch.labels = std::move(head.labels);
    return batch;
  }
  const Dataset& mem = memory.data();
  std::vector<std::size_t> rows;
  if (mem.size() >= bp) {
    rows = rng.sample_without_replacement(mem.size(), bp);
  } else {
    for (std::size_t i = 0; i < bp; ++i) rows.push_back(rng.index(mem.size()));
  }
  const Dataset tail = subset(mem, rows);
  batch.x = concat_batch(head.x, tail.x);
  batch.labels = std::move(head.labels);
  batch.labels.insert(batch.labels.end(), tail.labels.begin(), tail.labels.end());
  return batch;
}

TaskBatch compose_batch(const Dataset& current, const ExemplarMemory& memory,
                        std::size_t batch_current, std::size_t batch_exemplar,
                        std::size_t task, Rng& rng) {
  if (current.size() < batch_current) {
    throw std::invalid_argument("compose_batch: current task has fewer rows than B_c");
  }
  const auto rows = rng.sample_without_replacement(current.size(), batch_current);
  return compose_batch(current, rows, memory, batch_exemplar, task, rng);
}

}  // namespace tbnorm
