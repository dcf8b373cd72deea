#include "tbnorm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "tbnorm/checkpoint.hpp"
#include "tbnorm/errors.hpp"
#include "tbnorm/memory.hpp"
#include "tbnorm/train.hpp"

namespace tbnorm {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Gaussian toy.

namespace {

constexpr std::size_t kToyCopies = 10;
constexpr std::size_t kToyDim = 2 * kToyCopies;
constexpr std::size_t kToyTasks = 4;

void fill_toy_row(Tensor& x, std::size_t row, std::size_t task, bool equal, Rng& rng) {
  const auto m = toy_task_mean(task, equal);
  for (std::size_t k = 0; k < kToyCopies; ++k) {
    x(row, 2 * k) = rng.normal(m[0], 1.0);
    x(row, 2 * k + 1) = rng.normal(m[1], 1.0);
  }
}

Tensor toy_sample(std::size_t task, std::size_t n, bool equal, Rng& rng) {
  Tensor x({n, kToyDim, 1, 1});
  for (std::size_t i = 0; i < n; ++i) fill_toy_row(x, i, task, equal, rng);
  return x;
}

double group_slice_max_mean(const Tensor& z, std::size_t groups) {
  const std::size_t per = z.c() / groups;
  double worst = 0.0;
  for (std::size_t b = 0; b < z.n(); ++b)
    for (std::size_t g = 0; g < groups; ++g) {
      double s = 0.0;
      for (std::size_t c = g * per; c < (g + 1) * per; ++c)
        for (double v : z.plane(b, c)) s += v;
      worst = std::max(worst, std::abs(s / static_cast<double>(per * z.spatial())));
    }
  return worst;
}

}  // namespace

std::vector<double> toy_task_mean(std::size_t task, bool equal_means) {
  if (task < 1 || task > kToyTasks) throw std::out_of_range("toy task must be 1..4");
  if (equal_means) return {2.0, 2.0};
  static const double corners[kToyTasks][2] = {{2, 2}, {-2, 2}, {-2, -2}, {2, -2}};
  return {corners[task - 1][0], corners[task - 1][1]};
}

ToyReport exp_toy_gaussian(const ToyOptions& opt) {
  if (opt.groups == 0 || kToyDim % opt.groups != 0) {
    throw ConfigError("toy: groups must divide " + std::to_string(kToyDim));
  }
  if (opt.batch_exemplar == 0 || opt.memory_per_task * (kToyTasks - 1) < opt.batch_exemplar) {
    throw ConfigError("toy: memory must hold at least bp > 0 rows");
  }
  Rng rng(opt.seed);
  ToyReport rep;
  rep.seed = opt.seed;

  // Fixed memory of the three previous tasks.
  Tensor memory;
  for (std::size_t t = 1; t < kToyTasks; ++t) {
    Tensor part = toy_sample(t, opt.memory_per_task, opt.equal_means, rng);
    memory = t == 1 ? std::move(part) : concat_batch(memory, part);
  }

  NormLayerState bn(kToyDim), tbbn(kToyDim), cn(kToyDim);
  cn.groups = opt.groups;
  const BatchComposition comp{opt.batch_current, opt.batch_exemplar, kToyTasks};
  for (std::size_t step = 0; step < opt.batches; ++step) {
    const Tensor cur = toy_sample(kToyTasks, opt.batch_current, opt.equal_means, rng);
    const auto rows = rng.sample_without_replacement(memory.n(), opt.batch_exemplar);
    Tensor mem({opt.batch_exemplar, kToyDim, 1, 1});
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t d = 0; d < kToyDim; ++d) mem(i, d) = memory(rows[i], d);
    const Tensor x = concat_batch(cur, mem);
    (void)bn_forward_train(x, bn);
    (void)tbbn_forward_train(x, comp, tbbn);
    (void)cn_forward_train(x, cn);
  }

  // Population statistics of the balanced mixture, exact for x.
  std::vector<double> pop_mean(kToyDim, 0.0), pop_var(kToyDim, 1.0);
  for (std::size_t d = 0; d < kToyDim; ++d) {
    double m = 0.0;
    for (std::size_t t = 1; t <= kToyTasks; ++t) m += toy_task_mean(t, opt.equal_means)[d % 2];
    m /= kToyTasks;
    double spread = 0.0;
    for (std::size_t t = 1; t <= kToyTasks; ++t) {
      const double e = toy_task_mean(t, opt.equal_means)[d % 2] - m;
      spread += e * e;
    }
    pop_mean[d] = m;
    pop_var[d] = 1.0 + spread / kToyTasks;
  }
  // CN tracks statistics of group-normalized inputs; estimate them on a
  // large balanced sample.
  Tensor big;
  for (std::size_t t = 1; t <= kToyTasks; ++t) {
    Tensor part = toy_sample(t, 5000, opt.equal_means, rng);
    big = t == 1 ? std::move(part) : concat_batch(big, part);
  }
  const ChannelStats cn_pop = channel_stats(gn_forward(big, cn.groups, cn.epsilon));

  for (std::size_t d = 0; d < kToyDim; ++d) {
    rep.bn_mean_dev.push_back(std::abs(bn.running_mean[d] - pop_mean[d]));
    rep.tbbn_mean_dev.push_back(std::abs(tbbn.running_mean[d] - pop_mean[d]));
    rep.cn_mean_dev.push_back(std::abs(cn.running_mean[d] - cn_pop.mean[d]));
    rep.bn_var_dev.push_back(std::abs(bn.running_var[d] - pop_var[d]));
    rep.tbbn_var_dev.push_back(std::abs(tbbn.running_var[d] - pop_var[d]));
    rep.cn_var_dev.push_back(std::abs(cn.running_var[d] - cn_pop.var[d]));
    rep.tbbn_better_dims += rep.tbbn_mean_dev[d] < rep.bn_mean_dev[d];
  }

  // Balanced test cloud, first two dimensions.
  Tensor test;
  std::vector<std::size_t> task_of_row;
  for (std::size_t t = 1; t <= kToyTasks; ++t) {
    Tensor part = toy_sample(t, opt.test_per_task, opt.equal_means, rng);
    test = t == 1 ? std::move(part) : concat_batch(test, part);
    task_of_row.insert(task_of_row.end(), opt.test_per_task, t);
  }
  rep.cn_max_group_mean = group_slice_max_mean(gn_forward(test, cn.groups, cn.epsilon), cn.groups);
  const std::pair<const char*, Tensor> outputs[] = {{"input", test},
                                                    {"bn", bn_forward_eval(test, bn)},
                                                    {"cn", cn_forward_eval(test, cn)},
                                                    {"tbbn", tbbn_forward_eval(test, tbbn)}};
  for (const auto& [name, y] : outputs) {
    for (std::size_t b = 0; b < y.n(); ++b) rep.cloud.push_back({name, task_of_row[b], y(b, 0), y(b, 1)});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Bias check.

BiasRow measure_bn_mean_gap(std::size_t bc, std::size_t bp, std::size_t t,
                            std::size_t batches, std::uint64_t seed) {
  if (t < 2 || bp == 0 || batches < 2) {
    throw std::invalid_argument("measure_bn_mean_gap: needs t >= 2, bp > 0, batches >= 2");
  }
  std::vector<std::vector<double>> means;
  for (std::size_t i = 1; i <= t; ++i) means.push_back({static_cast<double>(i)});
  const MeanBias closed = expected_bn_mean_bias(means, bc, bp, t);
  const double mu_star = static_cast<double>(t + 1) / 2.0;

  Rng rng(seed);
  NormLayerState st(1);
  st.momentum = 1.0;  // running mean := batch mean
  Tensor x({bc + bp, 1, 1, 1});
  double sum = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < batches; ++k) {
    for (std::size_t i = 0; i < bc; ++i) x[i] = rng.normal(static_cast<double>(t), 1.0);
    for (std::size_t i = 0; i < bp; ++i) {
      const double task = static_cast<double>(1 + rng.index(t - 1));
      x[bc + i] = rng.normal(task, 1.0);
    }
    (void)bn_forward_train(x, st);
    const double m = st.running_mean[0];
    sum += m;
    sq += m * m;
  }
  const double n = static_cast<double>(batches);
  const double mean = sum / n;
  const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
  BiasRow row;
  row.bc = bc;
  row.bp = bp;
  row.t = t;
  row.derived = closed.derived[0];
  row.printed = closed.printed[0];
  row.measured = mu_star - mean;
  row.std_error = std::sqrt(var / n);
  return row;
}

std::vector<BiasRow> exp_bias_check(const BiasOptions& opt) {
  std::vector<BiasRow> rows;
  std::uint64_t k = 0;
  for (std::size_t t : opt.tasks) {
    for (std::size_t bc : opt.current) {
      if (bc == 0 || bc >= opt.batch || t < 2) continue;
      rows.push_back(measure_bn_mean_gap(bc, opt.batch - bc, t, opt.batches, opt.seed + 1000 * ++k));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CIL runs.

MetricSet compute_metrics(const AccuracyMatrix& a) {
  return {final_accuracy(a), average_accuracy(a), forgetting(a), learning_accuracy(a)};
}

CilOutcome run_cil(const TaskStream& stream, const TrainConfig& cfg) {
  Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  TinyModel model(model_spec_for(stream, cfg), 0, rng);
  ExemplarMemory memory(cfg.memory_capacity);
  AccuracyMatrix matrix;
  for (std::size_t t = 1; t <= stream.size(); ++t) {
    model.grow_head(stream.classes_per_task, rng);
    train_task(model, stream, t, memory, cfg, rng);
    matrix.append_row(evaluate(model, stream, t));
    memory.update(stream.task(t).train, stream.classes_seen(t), rng);
  }
  const Dataset test = stream.test_upto(stream.size());
  std::vector<std::size_t> task_of_class;
  for (std::size_t c = 0; c < stream.classes_seen(stream.size()); ++c) {
    task_of_class.push_back(stream.task_of_class(c));
  }
  const MisclassCounts tax = misclass_taxonomy(predict(model, test), test.labels, task_of_class);
  return {std::move(matrix), tax, std::move(model)};
}

TaskStream make_stream(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.idx_dir.empty()) return make_synthetic_stream(cfg.data, seed);
  const std::filesystem::path dir = cfg.idx_dir;
  Dataset train{load_idx_images(dir / "train-images-idx3-ubyte"),
                load_idx_labels(dir / "train-labels-idx1-ubyte")};
  Dataset test{load_idx_images(dir / "t10k-images-idx3-ubyte"),
               load_idx_labels(dir / "t10k-labels-idx1-ubyte")};
  TaskStream s = make_label_stream(train, test, cfg.data.classes_per_task);
  if (s.tasks.size() > cfg.data.tasks) s.tasks.resize(cfg.data.tasks);
  return s;
}

namespace {

CilReport summarize(std::vector<SeedResult> runs, double chance) {
  CilReport rep;
  rep.chance = chance;
  const double n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    rep.mean.final_accuracy += r.metrics.final_accuracy / n;
    rep.mean.average_accuracy += r.metrics.average_accuracy / n;
    rep.mean.forgetting += r.metrics.forgetting / n;
    rep.mean.learning_accuracy += r.metrics.learning_accuracy / n;
    rep.total.c_to_p += r.taxonomy.c_to_p;
    rep.total.c_to_c += r.taxonomy.c_to_c;
    rep.total.p_to_c += r.taxonomy.p_to_c;
    rep.total.p_to_p += r.taxonomy.p_to_p;
  }
  rep.runs = std::move(runs);
  return rep;
}

CilReport cil_over_seeds(const RunConfig& cfg, const TrainConfig& train) {
  std::vector<SeedResult> runs(cfg.seeds.size());
  double chance = 0.0;
  std::mutex m;
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const TaskStream stream = make_stream(cfg, seed);
    TrainConfig tc = train;
    tc.seed = seed;
    CilOutcome out = run_cil(stream, tc);
    runs[i] = {seed, out.matrix, compute_metrics(out.matrix), out.taxonomy};
    std::lock_guard lock(m);
    chance = 1.0 / static_cast<double>(stream.classes_seen(stream.size()));
  });
  return summarize(std::move(runs), chance);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

CilReport exp_cil_run(const RunConfig& cfg) {
  validate(cfg);
  return cil_over_seeds(cfg, cfg.train);
}

std::vector<AblationRow> exp_ablation(const RunConfig& cfg) {
  RunConfig tb = cfg;
  tb.train.norm = NormKind::tbbn;
  validate(tb);
  std::vector<AblationRow> rows;
  rows.push_back({"TBBN", NormKind::tbbn, AblationFlags::full(), {}});
  for (int c = 1; c <= 4; ++c) {
    rows.push_back({"Case " + std::to_string(c), NormKind::tbbn, AblationFlags::ablation_case(c), {}});
  }
  rows.push_back({"BN", NormKind::bn, AblationFlags::vanilla(), {}});
  for (auto& row : rows) {
    TrainConfig t = cfg.train;
    t.norm = row.norm;
    t.ablation = row.flags;
    row.report = cil_over_seeds(cfg, t);
  }
  return rows;
}

OracleReport exp_oracle(const RunConfig& cfg, const std::filesystem::path& checkpoint_dir) {
  RunConfig bn_cfg = cfg;
  bn_cfg.train.norm = NormKind::bn;
  validate(bn_cfg);
  OracleReport rep;
  rep.runs.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const TaskStream stream = make_stream(cfg, seed);
    const std::size_t T = stream.size();
    TrainConfig tc = bn_cfg.train;
    tc.seed = seed;
    CilOutcome ft = run_cil(stream, tc);
    TinyModel model = std::move(ft.model);
    if (!checkpoint_dir.empty()) {
      const auto dir = checkpoint_dir / ("seed_" + std::to_string(seed));
      std::filesystem::create_directories(dir);
      save_checkpoint(model, dir / "ft_bn.ckpt");
      model = load_checkpoint(dir / "ft_bn.ckpt");
    }
    OracleSeed& out = rep.runs[i];
    out.seed = seed;
    out.ft = evaluate(model, stream, T);
    const Dataset all = stream.train_upto(T);
    TinyModel stats = model;
    oracle_recompute_stats(stats, all);
    out.stats_only = evaluate(stats, stream, T);
    TinyModel affine = stats;
    Rng rng(seed ^ 0xa11ce5ULL);
    oracle_retrain_affine(affine, all, tc, rng);
    out.stats_affine = evaluate(affine, stream, T);
    TinyModel joint = train_joint(stream, tc);
    out.joint = evaluate(joint, stream, T);
  });
  const double n = static_cast<double>(rep.runs.size());
  for (const auto& r : rep.runs) {
    rep.ft += mean_of(r.ft) / n;
    rep.stats_only += mean_of(r.stats_only) / n;
    rep.stats_affine += mean_of(r.stats_affine) / n;
    rep.joint += mean_of(r.joint) / n;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Output files.

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json to_json(const MetricSet& m) {
  return {{"final_accuracy", m.final_accuracy},
          {"average_accuracy", m.average_accuracy},
          {"forgetting", m.forgetting},
          {"learning_accuracy", m.learning_accuracy}};
}

nlohmann::json to_json(const MisclassCounts& c) {
  return {{"c_to_p", c.c_to_p}, {"c_to_c", c.c_to_c}, {"p_to_c", c.p_to_c}, {"p_to_p", c.p_to_p}};
}

AccuracyMatrix mean_matrix(const std::vector<SeedResult>& runs) {
  AccuracyMatrix mean;
  if (runs.empty()) return mean;
  const std::size_t T = runs.front().matrix.tasks();
  for (std::size_t t = 1; t <= T; ++t) {
    std::vector<double> row(t, 0.0);
    for (const auto& r : runs) {
      for (std::size_t i = 1; i <= t; ++i) row[i - 1] += r.matrix(t, i) / static_cast<double>(runs.size());
    }
    for (double& v : row) v = std::clamp(v, 0.0, 1.0);
    mean.append_row(std::move(row));
  }
  return mean;
}

std::string matrix_csv(const AccuracyMatrix& a) {
  std::ostringstream o;
  write_csv(o, a);
  return o.str();
}

nlohmann::json write_cil(const std::filesystem::path& dir, const CilReport& rep) {
  std::filesystem::create_directories(dir);
  write_text(dir / "matrix.csv", matrix_csv(mean_matrix(rep.runs)));
  nlohmann::json per_seed = nlohmann::json::array();
  nlohmann::json tax_seed = nlohmann::json::array();
  for (const auto& r : rep.runs) {
    const auto sd = dir / ("seed_" + std::to_string(r.seed));
    std::filesystem::create_directories(sd);
    write_text(sd / "matrix.csv", matrix_csv(r.matrix));
    per_seed.push_back({{"seed", r.seed}, {"metrics", to_json(r.metrics)}});
    tax_seed.push_back({{"seed", r.seed}, {"counts", to_json(r.taxonomy)}});
  }
  const nlohmann::json metrics = {{"mean", to_json(rep.mean)}, {"seeds", per_seed}, {"chance", rep.chance}};
  write_json(dir / "metrics.json", metrics);
  write_json(dir / "taxonomy.json", {{"total", to_json(rep.total)}, {"seeds", tax_seed}});
  return metrics;
}

}  // namespace

nlohmann::json run_experiment(const RunConfig& cfg) {
  validate(cfg);
  const std::filesystem::path out = cfg.out;
  std::filesystem::create_directories(out);
  write_json(out / "config.json", to_json(cfg));
  nlohmann::json summary = {{"experiment", cfg.experiment}};

  if (cfg.experiment == "toy-gaussian") {
    std::vector<ToyReport> reps(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
      ToyOptions o;
      o.batches = cfg.toy_batches;
      o.batch_current = cfg.train.batch_current;
      o.batch_exemplar = cfg.train.batch_exemplar;
      o.groups = cfg.train.groups;
      o.seed = cfg.seeds[i];
      reps[i] = exp_toy_gaussian(o);
    });
    std::string dev = "seed,dim,bn_mean,tbbn_mean,cn_mean,bn_var,tbbn_var,cn_var\n";
    std::string cloud = "seed,layer,task,x0,x1\n";
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& r : reps) {
      for (std::size_t d = 0; d < r.bn_mean_dev.size(); ++d) {
        dev += std::to_string(r.seed) + "," + std::to_string(d);
        for (double v : {r.bn_mean_dev[d], r.tbbn_mean_dev[d], r.cn_mean_dev[d],
                         r.bn_var_dev[d], r.tbbn_var_dev[d], r.cn_var_dev[d]}) {
          dev += "," + format_double(v);
        }
        dev += "\n";
      }
      for (const auto& p : r.cloud) {
        cloud += std::to_string(r.seed) + "," + p.layer + "," + std::to_string(p.task) + "," +
                 format_double(p.x0) + "," + format_double(p.x1) + "\n";
      }
      seeds.push_back({{"seed", r.seed},
                       {"tbbn_better_dims", r.tbbn_better_dims},
                       {"cn_max_group_mean", r.cn_max_group_mean}});
    }
    write_text(out / "toy_deviation.csv", dev);
    write_text(out / "toy_cloud.csv", cloud);
    summary["seeds"] = seeds;
  } else if (cfg.experiment == "bias-check") {
    BiasOptions o;
    o.batch = cfg.train.batch_current + cfg.train.batch_exemplar;
    o.batches = cfg.bias_batches;
    o.seed = cfg.seeds.front();
    const auto rows = exp_bias_check(o);
    std::string csv = "bc,bp,t,derived,printed,measured,std_error\n";
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& r : rows) {
      csv += std::to_string(r.bc) + "," + std::to_string(r.bp) + "," + std::to_string(r.t) + "," +
             format_double(r.derived) + "," + format_double(r.printed) + "," +
             format_double(r.measured) + "," + format_double(r.std_error) + "\n";
      grid.push_back({{"bc", r.bc}, {"bp", r.bp}, {"t", r.t}, {"derived", r.derived},
                      {"measured", r.measured}, {"std_error", r.std_error}});
    }
    write_text(out / "bias_grid.csv", csv);
    summary["grid"] = grid;
  } else if (cfg.experiment == "cil-run") {
    summary["metrics"] = write_cil(out, exp_cil_run(cfg));
  } else if (cfg.experiment == "ablation") {
    const auto rows = exp_ablation(cfg);
    std::string csv = "variant,balanced_stats_train,balanced_stats_test,balanced_affine,A_f,A_a,F,A_l\n";
    nlohmann::json table = nlohmann::json::array();
    for (const auto& row : rows) {
      std::string slug = row.name;
      std::replace(slug.begin(), slug.end(), ' ', '_');
      write_cil(out / slug, row.report);
      const MetricSet& m = row.report.mean;
      csv += row.name + "," + std::to_string(row.flags.balanced_stats_train) + "," +
             std::to_string(row.flags.balanced_stats_test) + "," +
             std::to_string(row.flags.balanced_affine) + "," + format_double(m.final_accuracy) + "," +
             format_double(m.average_accuracy) + "," + format_double(m.forgetting) + "," +
             format_double(m.learning_accuracy) + "\n";
      table.push_back({{"variant", row.name}, {"mean", to_json(m)}, {"chance", row.report.chance}});
    }
    write_text(out / "ablation.csv", csv);
    write_json(out / "metrics.json", table);
    summary["table"] = table;
  } else if (cfg.experiment == "oracle") {
    const OracleReport rep = exp_oracle(cfg, out);
    std::string csv = "seed,variant,task,accuracy\n";
    for (const auto& r : rep.runs) {
      const std::pair<const char*, const std::vector<double>*> variants[] = {
          {"ft", &r.ft}, {"stats_only", &r.stats_only}, {"stats_affine", &r.stats_affine}, {"joint", &r.joint}};
      for (const auto& [name, acc] : variants) {
        for (std::size_t i = 0; i < acc->size(); ++i) {
          csv += std::to_string(r.seed) + "," + name + "," + std::to_string(i + 1) + "," +
                 format_double((*acc)[i]) + "\n";
        }
      }
    }
    write_text(out / "oracle.csv", csv);
    const nlohmann::json means = {{"ft", rep.ft}, {"stats_only", rep.stats_only},
                                  {"stats_affine", rep.stats_affine}, {"joint", rep.joint}};
    write_json(out / "metrics.json", {{"average_accuracy", means}});
    summary["average_accuracy"] = means;
  } else {
    throw ConfigError("unknown experiment '" + cfg.experiment +
                      "' (expected toy-gaussian|bias-check|cil-run|ablation|oracle)");
  }
  write_json(out / "report.json", summary);
  return summary;
}

}  // namespace tbnorm
