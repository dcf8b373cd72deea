#include <cmath>
#include <limits>

#include "doctest.h"
#include "tbnorm/errors.hpp"
#include "tbnorm/gradcheck.hpp"
#include "tbnorm/train.hpp"

using namespace tbnorm;

namespace {

// Two linearly separable 2-class blobs as a one-task stream.
TaskStream blobs(std::size_t per_class, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.tasks = 1;
  cfg.classes_per_task = 2;
  cfg.samples_per_class = per_class;
  cfg.scale = 2.0;
  cfg.noise = 0.5;
  cfg.task_dims = 0;
  return make_synthetic_stream(cfg, seed);
}

std::vector<double> flat_params(TinyModel& m) {
  std::vector<double> out;
  for (auto& p : m.parameters()) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

std::vector<double> flat_buffers(TinyModel& m) {
  std::vector<double> out;
  for (auto& b : m.buffers()) out.insert(out.end(), b.value.begin(), b.value.end());
  return out;
}

TinyModel trained_single_task(const TaskStream& s, TrainConfig cfg) {
  Rng rng(cfg.seed);
  TinyModel model(model_spec_for(s, cfg), 2, rng);
  const ExemplarMemory none(0);
  train_task(model, s, 1, none, cfg, rng);
  return model;
}

}  // namespace

TEST_CASE("softmax cross-entropy value and gradient") {
  const Tensor logits({2, 3, 1, 1}, std::vector<double>{0, 0, 0, 1, 2, 3});
  const auto r = softmax_cross_entropy(logits, {0, 2});
  const double l1 = std::log(3.0);
  const double l2 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 3.0;
  CHECK(r.loss == doctest::Approx((l1 + l2) / 2.0).epsilon(1e-14));
  CHECK(r.dlogits(0, 0) == doctest::Approx((1.0 / 3.0 - 1.0) / 2.0));

  const std::vector<double> theta(logits.data().begin(), logits.data().end());
  const ScalarFn f = [](std::span<const double> p) {
    return softmax_cross_entropy(Tensor({2, 3, 1, 1}, std::vector<double>(p.begin(), p.end())),
                                 {0, 2})
        .loss;
  };
  const std::vector<double> g(r.dlogits.data().begin(), r.dlogits.data().end());
  CHECK(check_gradients(f, theta, g, 1e-6, 1e-6).passed);

  const Tensor bad({1, 2, 1, 1}, std::vector<double>{std::numeric_limits<double>::infinity(), 0});
  CHECK_THROWS_AS((void)softmax_cross_entropy(bad, {1}), NumericError);
  CHECK_THROWS_AS((void)softmax_cross_entropy(logits, {0, 3}), std::invalid_argument);
}

TEST_CASE("separable blobs are learned in one task") {
  const TaskStream s = blobs(200, 1);
  for (NormKind kind : {NormKind::bn, NormKind::tbbn, NormKind::cn, NormKind::gn}) {
    CAPTURE(to_string(kind));
    TrainConfig cfg;
    cfg.norm = kind;
    TinyModel model = trained_single_task(s, cfg);
    CHECK(accuracy(model, s.task(1).train) >= 0.95);
  }
}

TEST_CASE("zero epochs leave the model unchanged") {
  const TaskStream s = blobs(60, 2);
  TrainConfig cfg;
  cfg.epochs = 0;
  Rng rng(3);
  TinyModel model(model_spec_for(s, cfg), 2, rng);
  const auto before = flat_params(model);
  const ExemplarMemory none(0);
  CHECK(train_task(model, s, 1, none, cfg, rng).empty());
  CHECK(flat_params(model) == before);
}

TEST_CASE("training is deterministic per seed") {
  const TaskStream s = blobs(60, 4);
  TrainConfig cfg;
  cfg.norm = NormKind::tbbn;
  cfg.epochs = 3;
  TinyModel a = trained_single_task(s, cfg);
  TinyModel b = trained_single_task(s, cfg);
  CHECK(flat_params(a) == flat_params(b));
  CHECK(flat_buffers(a) == flat_buffers(b));
  cfg.seed = 2;
  TinyModel c = trained_single_task(s, cfg);
  CHECK(flat_params(a) != flat_params(c));
}

TEST_CASE("train_task preconditions") {
  const TaskStream s = blobs(20, 5);
  TrainConfig cfg;
  Rng rng(1);
  TinyModel wrong_head(model_spec_for(s, cfg), 3, rng);
  const ExemplarMemory none(0);
  CHECK_THROWS_AS(train_task(wrong_head, s, 1, none, cfg, rng), std::invalid_argument);
  TinyModel model(model_spec_for(s, cfg), 2, rng);
  cfg.batch_current = 100;  // task has 32 training rows
  CHECK_THROWS_AS(train_task(model, s, 1, none, cfg, rng), ConfigError);
}

TEST_CASE("untrained model sits near chance") {
  SyntheticConfig sc;
  sc.samples_per_class = 500;
  const TaskStream s = make_synthetic_stream(sc, 6);
  TrainConfig cfg;
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    TinyModel model(model_spec_for(s, cfg), 10, rng);
    const auto acc = evaluate(model, s, 5);
    for (double a : acc) total += a;
  }
  CHECK(total / 50.0 == doctest::Approx(0.1).epsilon(0.5));
}

TEST_CASE("tiny data is memorized and evaluation is repeatable") {
  SyntheticConfig sc;
  sc.tasks = 1;
  sc.samples_per_class = 60;
  TaskStream s = make_synthetic_stream(sc, 7);
  s.tasks[0].test = s.tasks[0].train;  // train = test
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_current = 16;
  cfg.learning_rate = 0.1;
  TinyModel model = trained_single_task(s, cfg);
  const auto a = evaluate(model, s, 1);
  CHECK(a[0] >= 0.97);
  CHECK(evaluate(model, s, 1) == a);
}

TEST_CASE("statistics oracle") {
  const TaskStream s = blobs(200, 8);
  TrainConfig cfg;
  TinyModel model = trained_single_task(s, cfg);
  const Dataset& data = s.task(1).train;
  const double before = accuracy(model, s.task(1).test);
  const auto params = flat_params(model);

  SUBCASE("single-task accuracy barely moves") {
    oracle_recompute_stats(model, data);
    CHECK(std::abs(accuracy(model, s.task(1).test) - before) <= 0.02);
    CHECK(flat_params(model) == params);
  }
  SUBCASE("idempotent") {
    oracle_recompute_stats(model, data);
    const auto once = flat_buffers(model);
    oracle_recompute_stats(model, data);
    CHECK(flat_buffers(model) == once);
  }
  SUBCASE("first layer gets the exact input statistics of the data") {
    oracle_recompute_stats(model, data);
    Tensor h = model.forward_layer(0, data.x, Mode::eval);
    const auto exact = channel_stats(h);
    const auto* st = model.norm_states()[0];
    for (std::size_t c = 0; c < exact.mean.size(); ++c) {
      CHECK(st->running_mean[c] == doctest::Approx(exact.mean[c]).epsilon(1e-12));
      CHECK(st->running_var[c] == doctest::Approx(exact.var[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("recomputed statistics move against the imbalance bias") {
  // Two tasks, 3:1 batches. The running mean of the first norm layer leans
  // toward task 2; the recomputed one sits at the task average.
  SyntheticConfig sc;
  sc.tasks = 2;
  sc.samples_per_class = 300;
  const TaskStream s = make_synthetic_stream(sc, 9);
  TrainConfig cfg;
  cfg.epochs = 10;
  Rng rng(9);
  TinyModel model(model_spec_for(s, cfg), 0, rng);
  ExemplarMemory mem(cfg.memory_capacity);
  for (std::size_t t = 1; t <= 2; ++t) {
    model.grow_head(2, rng);
    train_task(model, s, t, mem, cfg, rng);
    mem.update(s.task(t).train, s.classes_seen(t), rng);
  }
  const auto ema = model.norm_states()[0]->running_mean;
  std::vector<std::vector<double>> task_means;
  for (std::size_t t = 1; t <= 2; ++t) {
    task_means.push_back(channel_stats(model.forward_layer(0, s.task(t).train.x, Mode::eval)).mean);
  }
  const auto bias = expected_bn_mean_bias(task_means, 48, 16, 2);
  oracle_recompute_stats(model, s.train_upto(2));
  const auto recomputed = model.norm_states()[0]->running_mean;

  std::size_t strong = 0, agree = 0;
  for (std::size_t c = 0; c < ema.size(); ++c) {
    if (std::abs(bias.derived[c]) < 0.1) continue;
    ++strong;
    agree += (recomputed[c] - ema[c]) * bias.derived[c] > 0.0;
  }
  REQUIRE(strong >= 5);
  CHECK(static_cast<double>(agree) >= 0.8 * static_cast<double>(strong));
}

TEST_CASE("affine oracle touches only gamma and beta") {
  const TaskStream s = blobs(100, 10);
  TrainConfig cfg;
  cfg.epochs = 3;
  TinyModel model = trained_single_task(s, cfg);
  const Dataset& data = s.task(1).train;
  oracle_recompute_stats(model, data);

  auto snapshot = [&] {
    std::vector<std::vector<double>> out;
    for (auto& p : model.parameters()) out.emplace_back(p.value.begin(), p.value.end());
    return out;
  };
  const auto before = snapshot();
  const auto buffers = flat_buffers(model);

  SUBCASE("lr 0 is a no-op") {
    TrainConfig zero = cfg;
    zero.learning_rate = 0.0;
    Rng rng(1);
    oracle_retrain_affine(model, data, zero, rng);
    CHECK(snapshot() == before);
  }
  SUBCASE("frozen parameters do not move") {
    Rng rng(2);
    oracle_retrain_affine(model, data, cfg, rng);
    const auto after = snapshot();
    const auto params = model.parameters();
    bool affine_moved = false;
    for (std::size_t i = 0; i < params.size(); ++i) {
      double delta = 0.0;
      for (std::size_t k = 0; k < after[i].size(); ++k) {
        delta = std::max(delta, std::abs(after[i][k] - before[i][k]));
      }
      if (params[i].role == ParamRole::norm_affine) {
        affine_moved |= delta > 0.0;
      } else {
        CHECK(delta == 0.0);
      }
    }
    CHECK(affine_moved);
    CHECK(flat_buffers(model) == buffers);
  }
}

TEST_CASE("joint training sees every class") {
  SyntheticConfig sc;
  sc.tasks = 3;
  sc.samples_per_class = 100;
  const TaskStream s = make_synthetic_stream(sc, 11);
  TrainConfig cfg;
  cfg.epochs = 10;
  TinyModel joint = train_joint(s, cfg);
  CHECK(joint.num_classes() == 6);
  for (double a : evaluate(joint, s, 3)) CHECK(a > 0.6);
}
