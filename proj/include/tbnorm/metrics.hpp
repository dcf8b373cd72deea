#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tbnorm {

/// a(t, i): accuracy on task i's test set after training through task t,
/// defined for 1 <= i <= t <= T. Indices are 1-based.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;

  /// Appends row t = tasks() + 1, which must hold exactly t entries in [0, 1].
  void append_row(std::vector<double> row);

  std::size_t tasks() const { return rows_.size(); }
  double operator()(std::size_t t, std::size_t i) const;
  const std::vector<double>& row(std::size_t t) const { return rows_.at(t - 1); }

  bool operator==(const AccuracyMatrix&) const = default;

 private:
  std::vector<std::vector<double>> rows_;
};

/// Mean of the last row.
double final_accuracy(const AccuracyMatrix& a);
/// Mean over t of the mean of row t.
double average_accuracy(const AccuracyMatrix& a);
/// (1/T) * sum over i of max_{t > i} (a(i, i) - a(t, i)); the empty maximum
/// for i = T counts as 0.
double forgetting(const AccuracyMatrix& a);
/// Mean of the diagonal.
double learning_accuracy(const AccuracyMatrix& a);

/// Row t holds a(t, 1..t), comma separated, %.17g.
void write_csv(std::ostream& out, const AccuracyMatrix& a);
AccuracyMatrix read_csv(std::istream& in);

/// Misclassified samples at the final evaluation, bucketed by whether the
/// true class and the predicted class belong to the current (last) task or a
/// previous one.
struct MisclassCounts {
  std::size_t c_to_p = 0;
  std::size_t c_to_c = 0;
  std::size_t p_to_c = 0;
  std::size_t p_to_p = 0;

  std::size_t total() const { return c_to_p + c_to_c + p_to_c + p_to_p; }
  bool operator==(const MisclassCounts&) const = default;
};

/// task_of_class[k] is the 1-based task owning class k; the current task is
/// the largest value present. Throws std::invalid_argument for a predicted or
/// true class outside task_of_class.
MisclassCounts misclass_taxonomy(const std::vector<std::size_t>& predictions,
                                 const std::vector<std::size_t>& labels,
                                 const std::vector<std::size_t>& task_of_class);

}  // namespace tbnorm
