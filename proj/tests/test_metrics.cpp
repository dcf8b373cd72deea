#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "tbnorm/metrics.hpp"
#include "tbnorm/rng.hpp"

using namespace tbnorm;

namespace {

AccuracyMatrix hand_matrix() {
  AccuracyMatrix a;
  a.append_row({0.9});
  a.append_row({0.8, 0.7});
  a.append_row({0.6, 0.5, 0.8});
  return a;
}

AccuracyMatrix constant(std::size_t T, double c) {
  AccuracyMatrix a;
  for (std::size_t t = 1; t <= T; ++t) a.append_row(std::vector<double>(t, c));
  return a;
}

AccuracyMatrix random_matrix(std::size_t T, Rng& rng) {
  AccuracyMatrix a;
  for (std::size_t t = 1; t <= T; ++t) {
    std::vector<double> row(t);
    for (double& v : row) v = rng.uniform();
    a.append_row(row);
  }
  return a;
}

}  // namespace

TEST_CASE("hand matrix") {
  const auto a = hand_matrix();
  // (0.6 + 0.5 + 0.8) / 3
  CHECK(final_accuracy(a) == doctest::Approx(1.9 / 3.0).epsilon(1e-12));
  // (0.9 + 0.75 + 1.9 / 3) / 3
  CHECK(average_accuracy(a) == doctest::Approx((0.9 + 0.75 + 1.9 / 3.0) / 3.0).epsilon(1e-12));
  // (max(0.1, 0.3) + 0.2 + 0) / 3
  CHECK(forgetting(a) == doctest::Approx(0.5 / 3.0).epsilon(1e-12));
  CHECK(learning_accuracy(a) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("degenerate matrices") {
  AccuracyMatrix one;
  one.append_row({0.42});
  CHECK(final_accuracy(one) == 0.42);
  CHECK(average_accuracy(one) == 0.42);
  CHECK(learning_accuracy(one) == 0.42);
  CHECK(forgetting(one) == 0.0);

  const auto ones = constant(4, 1.0);
  CHECK(final_accuracy(ones) == 1.0);
  CHECK(learning_accuracy(ones) == 1.0);

  for (double c : {0.0, 0.37, 1.0}) {
    const auto k = constant(5, c);
    CHECK(average_accuracy(k) == doctest::Approx(c));
    CHECK(forgetting(k) == 0.0);
    // Appending another task with the same accuracies changes nothing.
    const auto k6 = constant(6, c);
    CHECK(final_accuracy(k6) == doctest::Approx(final_accuracy(k)));
    CHECK(average_accuracy(k6) == doctest::Approx(average_accuracy(k)));
    CHECK(forgetting(k6) == forgetting(k));
    CHECK(learning_accuracy(k6) == doctest::Approx(learning_accuracy(k)));
  }

  CHECK_THROWS_AS((void)final_accuracy(AccuracyMatrix{}), std::invalid_argument);
}

TEST_CASE("forgetting is reported as-is when accuracy improves") {
  AccuracyMatrix a;
  a.append_row({0.5});
  a.append_row({0.7, 0.6});
  CHECK(forgetting(a) == doctest::Approx(-0.1));
}

TEST_CASE("metric bounds on random matrices") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_matrix(1 + rng.index(8), rng);
    double max_diag = 0.0;
    for (std::size_t t = 1; t <= a.tasks(); ++t) max_diag = std::max(max_diag, a(t, t));
    for (double m : {final_accuracy(a), average_accuracy(a), learning_accuracy(a)}) {
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
    CHECK(forgetting(a) <= max_diag);
    CHECK(forgetting(a) >= -1.0);
  }
}

TEST_CASE("matrix validation and CSV round trip") {
  AccuracyMatrix a;
  CHECK_THROWS_AS(a.append_row({0.1, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(a.append_row({1.5}), std::invalid_argument);
  const auto h = hand_matrix();
  CHECK_THROWS_AS((void)h(1, 2), std::out_of_range);

  Rng rng(2);
  const auto r = random_matrix(6, rng);
  std::stringstream ss;
  write_csv(ss, r);
  CHECK(read_csv(ss) == r);

  std::stringstream text("0.9\n0.8,0.7\n");
  const auto parsed = read_csv(text);
  CHECK(parsed(2, 2) == 0.7);
  std::stringstream bad("0.9\n0.8,x\n");
  CHECK_THROWS((void)read_csv(bad));
}

TEST_CASE("misclassification taxonomy") {
  // Ten tasks of one class each; class k belongs to task k + 1.
  std::vector<std::size_t> task_of_class;
  for (std::size_t k = 0; k < 10; ++k) task_of_class.push_back(k + 1);

  SUBCASE("all correct") {
    const std::vector<std::size_t> y{0, 3, 9};
    CHECK(misclass_taxonomy(y, y, task_of_class) == MisclassCounts{});
  }
  SUBCASE("current sample predicted as a task-1 class") {
    const auto m = misclass_taxonomy({0}, {9}, task_of_class);
    CHECK(m.c_to_p == 1);
    CHECK(m.total() == 1);
  }
  SUBCASE("each bucket") {
    std::vector<std::size_t> tc{1, 1, 2, 2};  // classes 0,1 in task 1; 2,3 in task 2
    const std::vector<std::size_t> labels{0, 1, 2, 3, 2, 0};
    const std::vector<std::size_t> preds{1, 3, 3, 0, 2, 0};
    const auto m = misclass_taxonomy(preds, labels, tc);
    CHECK(m.p_to_p == 1);
    CHECK(m.p_to_c == 1);
    CHECK(m.c_to_c == 1);
    CHECK(m.c_to_p == 1);
  }
  SUBCASE("counts sum to the number of errors") {
    Rng rng(3);
    std::vector<std::size_t> labels(500), preds(500);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < 500; ++i) {
      labels[i] = rng.index(10);
      preds[i] = rng.index(10);
      errors += labels[i] != preds[i];
    }
    CHECK(misclass_taxonomy(preds, labels, task_of_class).total() == errors);
  }
  SUBCASE("unseen class") {
    CHECK_THROWS_AS((void)misclass_taxonomy({12}, {0}, task_of_class), std::invalid_argument);
  }
}
