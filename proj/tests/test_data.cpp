#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "tbnorm/data.hpp"
#include "tbnorm/memory.hpp"

using namespace tbnorm;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tbnorm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// `per_class` rows for each class in [first, first + classes), row value = class.
Dataset labeled(std::size_t first, std::size_t classes, std::size_t per_class) {
  Dataset d{Tensor({classes * per_class, 2, 1, 1}), {}};
  for (std::size_t k = 0; k < classes; ++k)
    for (std::size_t s = 0; s < per_class; ++s) {
      const std::size_t row = d.labels.size();
      d.x(row, 0) = static_cast<double>(first + k);
      d.x(row, 1) = static_cast<double>(s);
      d.labels.push_back(first + k);
    }
  return d;
}

}  // namespace

TEST_CASE("synthetic stream structure") {
  SyntheticConfig cfg;
  const TaskStream s = make_synthetic_stream(cfg, 3);
  REQUIRE(s.size() == 5);
  std::set<std::size_t> seen;
  for (std::size_t t = 1; t <= s.size(); ++t) {
    const Task& task = s.task(t);
    CHECK(task.classes.size() == 2);
    for (auto c : task.classes) {
      CHECK(seen.insert(c).second);
      CHECK(s.task_of_class(c) == t);
    }
    CHECK(s.classes_seen(t) == 2 * t);
    CHECK(task.train.size() == 2 * 240);
    CHECK(task.test.size() == 2 * 60);
    for (auto l : task.train.labels) CHECK(s.task_of_class(l) == t);
    CHECK(task.train.x.shape() == Shape{480, 16, 1, 1});
  }
}

TEST_CASE("synthetic stream is a pure function of the seed") {
  SyntheticConfig cfg;
  cfg.samples_per_class = 20;
  const auto a = make_synthetic_stream(cfg, 9);
  const auto b = make_synthetic_stream(cfg, 9);
  const auto c = make_synthetic_stream(cfg, 10);
  CHECK(a.task(3).train.labels == b.task(3).train.labels);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.task(3).train.x.size(); ++i) {
    same &= a.task(3).train.x[i] == b.task(3).train.x[i];
    differs |= a.task(3).train.x[i] != c.task(3).train.x[i];
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("class means are distinct hypercube vertices with a per-task pattern") {
  SyntheticConfig cfg;
  const auto means = synthetic_class_means(cfg, 5);
  REQUIRE(means.size() == 10);
  std::set<std::vector<double>> uniq(means.begin(), means.end());
  CHECK(uniq.size() == 10);
  for (const auto& m : means)
    for (double v : m) CHECK(std::abs(v) == cfg.scale);
  for (std::size_t k = 0; k < 10; k += 2) {
    for (std::size_t d = 0; d < cfg.task_dims; ++d) CHECK(means[k][d] == means[k + 1][d]);
  }
}

TEST_CASE("default stream difficulty: nearest-true-mean accuracy near 0.9") {
  // With equal priors and shared isotropic noise the nearest-mean rule is the
  // Bayes classifier, so this estimates the Bayes accuracy.
  SyntheticConfig cfg;
  cfg.samples_per_class = 2000;
  double total = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto means = synthetic_class_means(cfg, seed);
    const auto s = make_synthetic_stream(cfg, seed);
    const Dataset test = s.test_upto(s.size());
    std::size_t hit = 0;
    for (std::size_t b = 0; b < test.size(); ++b) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t k = 0; k < means.size(); ++k) {
        double d = 0.0;
        for (std::size_t j = 0; j < cfg.dim; ++j) {
          const double e = test.x(b, j) - means[k][j];
          d += e * e;
        }
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      hit += best == test.labels[b];
    }
    total += static_cast<double>(hit) / static_cast<double>(test.size());
  }
  CHECK(total / 3.0 == doctest::Approx(0.9).epsilon(0.04));
}

TEST_CASE("IDX round trip") {
  const auto dir = temp_dir("idx");
  std::vector<std::uint8_t> pixels(3 * 2 * 4);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i * 10);
  write_idx_images(dir / "img", pixels, 3, 2, 4);
  write_idx_labels(dir / "lab", std::vector<std::uint8_t>{0, 1, 2});

  const Tensor x = load_idx_images(dir / "img");
  CHECK(x.shape() == Shape{3, 1, 2, 4});
  CHECK(x(1, 0, 1, 2) == doctest::Approx(pixels[8 + 4 + 2] / 255.0));
  CHECK(x(2, 0, 1, 3) == pixels.back() / 255.0);
  CHECK(load_idx_labels(dir / "lab") == std::vector<std::size_t>{0, 1, 2});

  // Header bytes are big-endian.
  std::ifstream raw(dir / "img", std::ios::binary);
  unsigned char head[8];
  raw.read(reinterpret_cast<char*>(head), 8);
  CHECK(head[2] == 0x08);
  CHECK(head[3] == 0x03);
  CHECK(head[7] == 3);
}

TEST_CASE("IDX errors") {
  const auto dir = temp_dir("idx_bad");
  write_idx_labels(dir / "lab", std::vector<std::uint8_t>{1, 2});
  CHECK_THROWS_AS((void)load_idx_images(dir / "lab"), std::runtime_error);
  CHECK_THROWS_AS((void)load_idx_labels(dir / "missing"), std::runtime_error);
  {
    std::ofstream out(dir / "short", std::ios::binary);
    const unsigned char h[] = {0, 0, 8, 3, 0, 0, 0, 5, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2};
    out.write(reinterpret_cast<const char*>(h), sizeof h);
  }
  CHECK_THROWS_AS((void)load_idx_images(dir / "short"), std::runtime_error);
}

TEST_CASE("label stream groups contiguous labels") {
  Dataset train = labeled(0, 5, 3);
  Dataset test = labeled(0, 5, 1);
  const TaskStream s = make_label_stream(train, test, 2);
  REQUIRE(s.size() == 2);  // label 4 has no full task
  CHECK(s.task(2).classes == std::vector<std::size_t>{2, 3});
  CHECK(s.task(2).train.size() == 6);
  for (auto l : s.task(1).train.labels) CHECK(l < 2);
}

TEST_CASE("memory quota after task 2 with |M|=12, m=2") {
  Rng rng(1);
  ExemplarMemory mem(12);
  mem.update(labeled(0, 2, 50), 2, rng);
  CHECK(mem.quota() == 6);
  CHECK(mem.count(0) == 6);
  mem.update(labeled(2, 2, 50), 4, rng);
  CHECK(mem.quota() == 3);
  for (std::size_t c = 0; c < 4; ++c) CHECK(mem.count(c) == 3);
  CHECK(mem.size() == 12);
}

TEST_CASE("memory of 2000 over 100 classes keeps 20 per class") {
  Rng rng(2);
  ExemplarMemory mem(2000);
  for (std::size_t t = 0; t < 10; ++t) {
    mem.update(labeled(10 * t, 10, 30), 10 * (t + 1), rng);
    CHECK(mem.size() <= 2000);
  }
  for (std::size_t c = 0; c < 100; ++c) CHECK(mem.count(c) == 20);
}

TEST_CASE("memory never duplicates a scarce class and stays balanced") {
  Rng rng(3);
  ExemplarMemory mem(12);
  Dataset d = concat(labeled(0, 1, 1), labeled(1, 1, 40));
  mem.update(d, 2, rng);
  CHECK(mem.count(0) == 1);
  CHECK(mem.count(1) == 6);

  // Stored rows of a class are distinct rows of its source.
  ExemplarMemory m2(40);
  m2.update(labeled(0, 4, 25), 4, rng);
  std::map<std::size_t, std::set<double>> ids;
  const Dataset& stored = m2.data();
  for (std::size_t i = 0; i < stored.size(); ++i) {
    CHECK(ids[stored.labels[i]].insert(stored.x(i, 1)).second);
    CHECK(stored.x(i, 0) == static_cast<double>(stored.labels[i]));
  }
}

TEST_CASE("memory capacity and balance hold over randomized schedules") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t cap = 5 + rng.index(60);
    const std::size_t m = 1 + rng.index(4);
    ExemplarMemory mem(cap);
    std::map<std::size_t, std::size_t> available;
    for (std::size_t t = 0; t < 6; ++t) {
      const std::size_t per_class = 2 + rng.index(30);
      for (std::size_t c = m * t; c < m * (t + 1); ++c) available[c] = per_class;
      mem.update(labeled(m * t, m, per_class), m * (t + 1), rng);
      REQUIRE(mem.size() <= cap);
      CHECK(mem.quota() == cap / (m * (t + 1)));
      // Classes stay at min(available, quota), so counts among classes with
      // enough samples agree exactly.
      for (const auto& [c, avail] : available) {
        CHECK(mem.count(c) == std::min(avail, mem.quota()));
      }
    }
  }
}

TEST_CASE("compose_batch layout") {
  Rng rng(5);
  const Dataset cur = labeled(6, 2, 40);
  ExemplarMemory mem(40);
  mem.update(labeled(0, 6, 20), 6, rng);

  const TaskBatch b = compose_batch(cur, mem, 48, 16, 4, rng);
  CHECK(b.x.n() == 64);
  CHECK(b.comp.current == 48);
  CHECK(b.comp.exemplar == 16);
  CHECK(b.comp.task == 4);
  for (std::size_t i = 0; i < 48; ++i) CHECK(b.labels[i] >= 6);
  for (std::size_t i = 48; i < 64; ++i) CHECK(b.labels[i] < 6);

  const TaskBatch first = compose_batch(cur, mem, 48, 16, 1, rng);
  CHECK(first.x.n() == 48);
  CHECK(first.comp.exemplar == 0);

  CHECK_THROWS_AS((void)compose_batch(cur, ExemplarMemory(10), 48, 16, 2, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)compose_batch(Dataset{}, mem, 1, 1, 2, rng), std::invalid_argument);
}

TEST_CASE("memory rows per previous task average B_p / 4 at t = 5") {
  // Memory balanced over four previous tasks of two classes each.
  Rng rng(6);
  ExemplarMemory mem(96);
  mem.update(labeled(0, 8, 30), 8, rng);
  const Dataset cur = labeled(8, 2, 30);
  const std::size_t batches = 10000;
  std::vector<double> sum(4, 0.0), sq(4, 0.0);
  for (std::size_t k = 0; k < batches; ++k) {
    const TaskBatch b = compose_batch(cur, mem, 48, 16, 5, rng);
    std::vector<double> count(4, 0.0);
    for (std::size_t i = 48; i < 64; ++i) count[b.labels[i] / 2] += 1.0;
    for (int t = 0; t < 4; ++t) {
      sum[t] += count[t];
      sq[t] += count[t] * count[t];
    }
  }
  for (int t = 0; t < 4; ++t) {
    const double mean = sum[t] / batches;
    const double var = sq[t] / batches - mean * mean;
    const double se = std::sqrt(var / batches);
    CHECK(std::abs(mean - 4.0) <= 3.0 * se);
  }
}
