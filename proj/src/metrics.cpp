#include "tbnorm/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tbnorm {

void AccuracyMatrix::append_row(std::vector<double> row) {
  if (row.size() != rows_.size() + 1) {
    throw std::invalid_argument("AccuracyMatrix: row " + std::to_string(rows_.size() + 1) +
                                " needs " + std::to_string(rows_.size() + 1) +
                                " entries, got " + std::to_string(row.size()));
  }
  for (double v : row) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("AccuracyMatrix: entry outside [0, 1]");
  }
  rows_.push_back(std::move(row));
}

double AccuracyMatrix::operator()(std::size_t t, std::size_t i) const {
  if (t == 0 || i == 0 || i > t || t > rows_.size()) {
    throw std::out_of_range("AccuracyMatrix: (" + std::to_string(t) + ", " +
                            std::to_string(i) + ") undefined");
  }
  return rows_[t - 1][i - 1];
}

namespace {

void require_nonempty(const AccuracyMatrix& a) {
  if (a.tasks() == 0) throw std::invalid_argument("metrics: empty accuracy matrix");
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double final_accuracy(const AccuracyMatrix& a) {
  require_nonempty(a);
  return mean(a.row(a.tasks()));
}

double average_accuracy(const AccuracyMatrix& a) {
  require_nonempty(a);
  double s = 0.0;
  for (std::size_t t = 1; t <= a.tasks(); ++t) s += mean(a.row(t));
  return s / static_cast<double>(a.tasks());
}

double forgetting(const AccuracyMatrix& a) {
  require_nonempty(a);
  const std::size_t T = a.tasks();
  double s = 0.0;
  for (std::size_t i = 1; i < T; ++i) {
    double worst = a(i, i) - a(i + 1, i);
    for (std::size_t t = i + 2; t <= T; ++t) worst = std::max(worst, a(i, i) - a(t, i));
    s += worst;
  }
  return s / static_cast<double>(T);
}

double learning_accuracy(const AccuracyMatrix& a) {
  require_nonempty(a);
  double s = 0.0;
  for (std::size_t t = 1; t <= a.tasks(); ++t) s += a(t, t);
  return s / static_cast<double>(a.tasks());
}

void write_csv(std::ostream& out, const AccuracyMatrix& a) {
  char buf[32];
  for (std::size_t t = 1; t <= a.tasks(); ++t) {
    const auto& row = a.row(t);
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
}

AccuracyMatrix read_csv(std::istream& in) {
  AccuracyMatrix a;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument("matrix csv: bad cell '" + cell + "'");
      row.push_back(v);
    }
    a.append_row(std::move(row));
  }
  return a;
}

MisclassCounts misclass_taxonomy(const std::vector<std::size_t>& predictions,
                                 const std::vector<std::size_t>& labels,
                                 const std::vector<std::size_t>& task_of_class) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("misclass_taxonomy: prediction and label counts differ");
  }
  if (task_of_class.empty()) throw std::invalid_argument("misclass_taxonomy: no classes");
  const std::size_t current = *std::max_element(task_of_class.begin(), task_of_class.end());
  MisclassCounts out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] >= task_of_class.size() || labels[i] >= task_of_class.size()) {
      throw std::invalid_argument("misclass_taxonomy: class " +
                                  std::to_string(std::max(predictions[i], labels[i])) +
                                  " not seen");
    }
    if (predictions[i] == labels[i]) continue;
    const bool src_cur = task_of_class[labels[i]] == current;
    const bool dst_cur = task_of_class[predictions[i]] == current;
    if (src_cur) {
      ++(dst_cur ? out.c_to_c : out.c_to_p);
    } else {
      ++(dst_cur ? out.p_to_c : out.p_to_p);
    }
  }
  return out;
}

}  // namespace tbnorm
