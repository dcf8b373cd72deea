#include "tbnorm/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "tbnorm/errors.hpp"
#include "tbnorm/rng.hpp"

namespace tbnorm {

Dataset subset(const Dataset& d, std::span<const std::size_t> rows) {
  Shape s = d.x.shape();
  s.n = rows.size();
  Dataset out{Tensor(s), {}};
  out.labels.reserve(rows.size());
  const std::size_t len = s.c * s.spatial();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= d.size()) throw std::out_of_range("subset: row out of range");
    const auto src = d.x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.x.data().begin() + i * len);
    out.labels.push_back(d.labels[rows[i]]);
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Dataset out{concat_batch(a.x, b.x), a.labels};
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

Dataset TaskStream::train_upto(std::size_t upto) const {
  Dataset all;
  for (std::size_t t = 1; t <= upto; ++t) all = concat(all, task(t).train);
  return all;
}

Dataset TaskStream::test_upto(std::size_t upto) const {
  Dataset all;
  for (std::size_t t = 1; t <= upto; ++t) all = concat(all, task(t).test);
  return all;
}

namespace {

std::vector<double> random_signs(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = (rng.next_u64() >> 63) ? scale : -scale;
  return v;
}

void validate(const SyntheticConfig& cfg) {
  if (cfg.tasks == 0 || cfg.classes_per_task == 0 || cfg.dim == 0) {
    throw ConfigError("synthetic stream: tasks, classes_per_task and dim must be positive");
  }
  if (cfg.task_dims > cfg.dim) {
    throw ConfigError("synthetic stream: task_dims exceeds dim");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ConfigError("synthetic stream: train_fraction must lie in (0, 1)");
  }
  if (cfg.samples_per_class < 2) {
    throw ConfigError("synthetic stream: need at least 2 samples per class");
  }
}

}  // namespace

std::vector<std::vector<double>> synthetic_class_means(const SyntheticConfig& cfg,
                                                       std::uint64_t seed) {
  validate(cfg);
  Rng rng(seed);
  const std::size_t free_dims = cfg.dim - cfg.task_dims;
  const std::size_t classes = cfg.tasks * cfg.classes_per_task;

  // Distinct vertices: resample on collision.
  std::set<std::vector<double>> used_patterns;
  std::set<std::vector<double>> used_means;
  std::vector<std::vector<double>> means;
  means.reserve(classes);
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    std::vector<double> pattern = random_signs(rng, cfg.task_dims, cfg.scale);
    for (int tries = 0; cfg.task_dims > 0 && used_patterns.count(pattern) && tries < 64; ++tries) {
      pattern = random_signs(rng, cfg.task_dims, cfg.scale);
    }
    used_patterns.insert(pattern);
    for (std::size_t k = 0; k < cfg.classes_per_task; ++k) {
      std::vector<double> mean;
      for (int tries = 0;; ++tries) {
        mean = pattern;
        const auto rest = random_signs(rng, free_dims, cfg.scale);
        mean.insert(mean.end(), rest.begin(), rest.end());
        if (!used_means.count(mean)) break;
        if (tries > 256) {
          throw ConfigError("synthetic stream: not enough distinct hypercube vertices");
        }
      }
      used_means.insert(mean);
      means.push_back(std::move(mean));
    }
  }
  return means;
}

TaskStream make_synthetic_stream(const SyntheticConfig& cfg, std::uint64_t seed) {
  const auto means = synthetic_class_means(cfg, seed);
  Rng rng(seed ^ 0x5eed5eedULL);
  const std::size_t n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(cfg.train_fraction *
                                  static_cast<double>(cfg.samples_per_class)));
  const std::size_t n_test = cfg.samples_per_class - n_train;
  if (n_test == 0) throw ConfigError("synthetic stream: empty test split");

  TaskStream stream;
  stream.classes_per_task = cfg.classes_per_task;
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    const std::size_t per_task = cfg.classes_per_task * cfg.samples_per_class;
    Dataset pool{Tensor({per_task, cfg.dim, 1, 1}), {}};
    Task task;
    for (std::size_t k = 0; k < cfg.classes_per_task; ++k) {
      const std::size_t cls = t * cfg.classes_per_task + k;
      task.classes.push_back(cls);
      for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
        const std::size_t row = pool.labels.size();
        for (std::size_t d = 0; d < cfg.dim; ++d) {
          pool.x(row, d) = rng.normal(means[cls][d], cfg.noise);
        }
        pool.labels.push_back(cls);
      }
    }
    // Deterministic stratified 80/20 split per class.
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t k = 0; k < cfg.classes_per_task; ++k) {
      auto perm = rng.permutation(cfg.samples_per_class);
      for (std::size_t i = 0; i < perm.size(); ++i) {
        const std::size_t row = k * cfg.samples_per_class + perm[i];
        (i < n_train ? train_rows : test_rows).push_back(row);
      }
    }
    rng.shuffle(train_rows);
    task.train = subset(pool, train_rows);
    task.test = subset(pool, test_rows);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw std::runtime_error("IDX: truncated header in " + path.string());
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::vector<unsigned char> read_payload(std::istream& in, std::size_t count,
                                        const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(count);
  if (count && !in.read(reinterpret_cast<char*>(bytes.data()),
                        static_cast<std::streamsize>(count))) {
    throw std::runtime_error("IDX: truncated payload in " + path.string());
  }
  return bytes;
}

std::ifstream open_idx(const std::filesystem::path& path, std::uint32_t magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("IDX: cannot open " + path.string());
  const std::uint32_t got = read_be32(in, path);
  if (got != magic) {
    throw std::runtime_error("IDX: bad magic in " + path.string());
  }
  return in;
}

}  // namespace

Tensor load_idx_images(const std::filesystem::path& path) {
  auto in = open_idx(path, kIdxImages);
  const std::size_t n = read_be32(in, path);
  const std::size_t rows = read_be32(in, path);
  const std::size_t cols = read_be32(in, path);
  const auto bytes = read_payload(in, n * rows * cols, path);
  Tensor x({n, 1, rows, cols});
  for (std::size_t i = 0; i < bytes.size(); ++i) x[i] = bytes[i] / 255.0;
  return x;
}

std::vector<std::size_t> load_idx_labels(const std::filesystem::path& path) {
  auto in = open_idx(path, kIdxLabels);
  const std::size_t n = read_be32(in, path);
  const auto bytes = read_payload(in, n, path);
  return {bytes.begin(), bytes.end()};
}

void write_idx_images(const std::filesystem::path& path,
                      std::span<const std::uint8_t> pixels, std::size_t count,
                      std::size_t rows, std::size_t cols) {
  if (pixels.size() != count * rows * cols) {
    throw std::invalid_argument("write_idx_images: pixel count mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("IDX: cannot write " + path.string());
  write_be32(out, kIdxImages);
  write_be32(out, static_cast<std::uint32_t>(count));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path,
                      std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("IDX: cannot write " + path.string());
  write_be32(out, kIdxLabels);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

TaskStream make_label_stream(const Dataset& train, const Dataset& test,
                             std::size_t classes_per_task) {
  if (classes_per_task == 0) throw ConfigError("classes_per_task must be positive");
  if (train.x.n() != train.size() || test.x.n() != test.size()) {
    throw std::invalid_argument("make_label_stream: image and label counts differ");
  }
  std::size_t max_label = 0;
  for (auto l : train.labels) max_label = std::max(max_label, l);
  const std::size_t tasks = (max_label + 1) / classes_per_task;
  if (tasks == 0) throw ConfigError("make_label_stream: fewer classes than one task");

  TaskStream stream;
  stream.classes_per_task = classes_per_task;
  for (std::size_t t = 0; t < tasks; ++t) {
    const std::size_t lo = t * classes_per_task;
    const std::size_t hi = lo + classes_per_task;
    auto rows_of = [&](const Dataset& d) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.labels[i] >= lo && d.labels[i] < hi) rows.push_back(i);
      }
      return rows;
    };
    Task task;
    for (std::size_t c = lo; c < hi; ++c) task.classes.push_back(c);
    const auto tr = rows_of(train);
    const auto te = rows_of(test);
    task.train = subset(train, tr);
    task.test = subset(test, te);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

}  // namespace tbnorm
