#include "tbnorm/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tbnorm/errors.hpp"

namespace tbnorm {

namespace {

constexpr std::size_t kEvalChunk = 512;

template <class F>
void for_each_chunk(const Dataset& data, std::size_t chunk, F&& f) {
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(data.size(), begin + chunk);
    f(begin, slice_batch(data.x, begin, end));
  }
}

}  // namespace

ModelSpec model_spec_for(const TaskStream& stream, const TrainConfig& cfg,
                         std::vector<std::size_t> hidden) {
  ModelSpec spec;
  spec.input = stream.sample_shape();
  spec.arch = spec.input.spatial() > 1 ? Architecture::conv : Architecture::mlp;
  if (!hidden.empty()) {
    spec.hidden = std::move(hidden);
  } else if (spec.arch == Architecture::conv) {
    spec.hidden = {8, 16};
  }
  spec.norm = cfg.norm;
  spec.groups = cfg.groups;
  spec.ablation = cfg.ablation;
  spec.bessel = cfg.bessel;
  return spec;
}

LossResult softmax_cross_entropy(const Tensor& logits,
                                 const std::vector<std::size_t>& labels) {
  const std::size_t n = logits.n(), k = logits.c();
  if (labels.size() != n) throw std::invalid_argument("cross-entropy: label count mismatch");
  if (n == 0) throw std::invalid_argument("cross-entropy: empty batch");
  LossResult out{0.0, Tensor(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    if (labels[b] >= k) {
      throw std::invalid_argument("cross-entropy: label " + std::to_string(labels[b]) +
                                  " outside " + std::to_string(k) + " classes");
    }
    double mx = logits(b, 0);
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits(b, c));
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(logits(b, c) - mx);
    const double log_z = mx + std::log(z);
    out.loss += (log_z - logits(b, labels[b])) * inv_n;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(logits(b, c) - log_z);
      out.dlogits(b, c) = (p - (c == labels[b] ? 1.0 : 0.0)) * inv_n;
    }
  }
  if (!std::isfinite(out.loss)) throw NumericError("cross-entropy: non-finite loss");
  return out;
}

void sgd_step(TinyModel& model, double lr, double weight_decay,
              bool norm_affine_only) {
  for (auto& p : model.parameters()) {
    if (norm_affine_only && p.role != ParamRole::norm_affine) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      p.value[i] -= lr * (p.grad[i] + weight_decay * p.value[i]);
    }
  }
}

std::vector<EpochLog> train_task(TinyModel& model, const TaskStream& stream,
                                 std::size_t t, const ExemplarMemory& memory,
                                 const TrainConfig& cfg, Rng& rng) {
  if (t == 0 || t > stream.size()) throw std::out_of_range("train_task: task index");
  if (model.num_classes() != stream.classes_seen(t)) {
    throw std::invalid_argument("train_task: head has " +
                                std::to_string(model.num_classes()) +
                                " outputs, expected " +
                                std::to_string(stream.classes_seen(t)));
  }
  const Dataset& data = stream.task(t).train;
  if (data.size() < cfg.batch_current) {
    throw ConfigError("task " + std::to_string(t) + " has " + std::to_string(data.size()) +
                      " training rows, fewer than B_c=" + std::to_string(cfg.batch_current));
  }
  std::vector<EpochLog> logs;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto perm = rng.permutation(data.size());
    EpochLog log;
    for (std::size_t begin = 0; begin + cfg.batch_current <= perm.size();
         begin += cfg.batch_current) {
      const std::span<const std::size_t> rows(perm.data() + begin, cfg.batch_current);
      const TaskBatch batch =
          compose_batch(data, rows, memory, cfg.batch_exemplar, t, rng);
      model.zero_grad();
      const Tensor logits = model.forward(batch.x, Mode::train, batch.comp);
      const LossResult l = softmax_cross_entropy(logits, batch.labels);
      model.backward(l.dlogits);
      sgd_step(model, cfg.learning_rate, cfg.weight_decay);
      log.mean_loss += l.loss;
      ++log.steps;
    }
    if (log.steps) log.mean_loss /= static_cast<double>(log.steps);
    logs.push_back(log);
  }
  return logs;
}

std::vector<std::size_t> predict(TinyModel& model, const Dataset& data) {
  std::vector<std::size_t> out;
  out.reserve(data.size());
  for_each_chunk(data, kEvalChunk, [&](std::size_t, const Tensor& x) {
    const Tensor logits = model.forward(x, Mode::eval);
    for (std::size_t b = 0; b < logits.n(); ++b) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < logits.c(); ++c) {
        if (logits(b, c) > logits(b, best)) best = c;
      }
      out.push_back(best);
    }
  });
  return out;
}

double accuracy(TinyModel& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
  const auto pred = predict(model, data);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::vector<double> evaluate(TinyModel& model, const TaskStream& stream,
                             std::size_t upto) {
  std::vector<double> row;
  for (std::size_t i = 1; i <= upto; ++i) row.push_back(accuracy(model, stream.task(i).test));
  return row;
}

void oracle_recompute_stats(TinyModel& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("oracle_recompute_stats: empty data");
  const auto& layers = model.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto* norm = std::get_if<NormLayer>(&model.layers()[k]);
    if (!norm) continue;
    // Chunked exact aggregation (Chan et al. pairwise merge).
    const std::size_t C = norm->state.channels();
    std::vector<double> mean(C, 0.0), m2(C, 0.0);
    double count = 0.0;
    for_each_chunk(data, kEvalChunk, [&](std::size_t, const Tensor& x) {
      Tensor h = x;
      for (std::size_t i = 0; i < k; ++i) h = model.forward_layer(i, h, Mode::eval);
      if (norm->kind == NormKind::cn) h = gn_forward(h, norm->state.groups, norm->state.epsilon);
      const auto s = channel_stats(h);
      const double nb = static_cast<double>(h.n() * h.spatial());
      for (std::size_t c = 0; c < C; ++c) {
        const double delta = s.mean[c] - mean[c];
        const double total = count + nb;
        mean[c] += delta * nb / total;
        m2[c] += s.var[c] * nb + delta * delta * count * nb / total;
      }
      count += nb;
    });
    for (std::size_t c = 0; c < C; ++c) {
      norm->state.running_mean[c] = mean[c];
      norm->state.running_var[c] = m2[c] / count;
    }
  }
}

void oracle_retrain_affine(TinyModel& model, const Dataset& data,
                           const TrainConfig& cfg, Rng& rng) {
  const std::size_t batch = cfg.batch_current + cfg.batch_exemplar;
  if (data.empty() || batch == 0) throw std::invalid_argument("oracle_retrain_affine: empty data");
  for (std::size_t e = 0; e < cfg.oracle_epochs; ++e) {
    const auto perm = rng.permutation(data.size());
    for (std::size_t begin = 0; begin < perm.size(); begin += batch) {
      const std::size_t end = std::min(perm.size(), begin + batch);
      const std::span<const std::size_t> rows(perm.data() + begin, end - begin);
      const Dataset b = subset(data, rows);
      model.zero_grad();
      const Tensor logits = model.forward(b.x, Mode::frozen);
      const LossResult l = softmax_cross_entropy(logits, b.labels);
      model.backward(l.dlogits);
      sgd_step(model, cfg.learning_rate, cfg.weight_decay, true);
    }
  }
}

TinyModel train_joint(const TaskStream& stream, const TrainConfig& cfg) {
  Rng rng(cfg.seed);
  const std::size_t classes = stream.classes_seen(stream.size());
  TinyModel model(model_spec_for(stream, cfg), classes, rng);
  TaskStream joint;
  joint.classes_per_task = classes;
  Task all;
  all.train = stream.train_upto(stream.size());
  all.test = stream.test_upto(stream.size());
  joint.tasks.push_back(std::move(all));
  TrainConfig jc = cfg;
  jc.batch_current = cfg.batch_current + cfg.batch_exemplar;
  jc.batch_exemplar = 0;
  const ExemplarMemory none(0);
  train_task(model, joint, 1, none, jc, rng);
  return model;
}

}  // namespace tbnorm
