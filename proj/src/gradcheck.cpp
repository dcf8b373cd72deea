#include "tbnorm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tbnorm/rng.hpp"

namespace tbnorm {

double GradReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.max_rel_error);
  return worst;
}

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradReport check_gradients(const ScalarFn& f, std::span<const double> params,
                           std::span<const double> analytic,
                           std::span<const ParamBlock> blocks, double step,
                           double threshold) {
  if (analytic.size() != params.size()) {
    throw std::invalid_argument("check_gradients: analytic gradient has " +
                                std::to_string(analytic.size()) +
                                " entries for " +
                                std::to_string(params.size()) + " parameters");
  }
  if (!(step > 0.0)) throw std::invalid_argument("check_gradients: step <= 0");

  std::vector<double> probe(params.begin(), params.end());
  auto eval = [&](std::size_t i) {
    const double v = f(probe);
    if (!std::isfinite(v)) {
      throw NumericError("check_gradients: non-finite value at coordinate " +
                         std::to_string(i));
    }
    return v;
  };

  GradReport report;
  report.step = step;
  report.threshold = threshold;
  for (const auto& block : blocks) {
    if (block.offset + block.length > params.size()) {
      throw std::invalid_argument("check_gradients: block '" + block.name +
                                  "' out of range");
    }
    BlockReport br;
    br.name = block.name;
    br.count = block.length;
    double total = 0.0;
    for (std::size_t i = block.offset; i < block.offset + block.length; ++i) {
      const double saved = probe[i];
      probe[i] = saved + step;
      const double up = eval(i);
      probe[i] = saved - step;
      const double down = eval(i);
      probe[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[i], numeric);
      br.max_rel_error = std::max(br.max_rel_error, err);
      total += err;
    }
    br.mean_rel_error = block.length ? total / static_cast<double>(block.length) : 0.0;
    report.blocks.push_back(std::move(br));
  }
  report.passed = report.max_rel_error() < threshold;
  return report;
}

GradReport check_gradients(const ScalarFn& f, std::span<const double> params,
                           std::span<const double> analytic, double step,
                           double threshold) {
  const ParamBlock all{"params", 0, params.size()};
  return check_gradients(f, params, analytic, std::span(&all, 1), step,
                         threshold);
}

namespace {

struct LayerRun {
  Tensor y;
  NormGrads grads;
};

// Forward of the chosen layer on a fresh state; optionally backward with dy.
LayerRun run_layer(const LayerCheckSpec& spec, const Tensor& x,
                   NormLayerState state, const Tensor* dy) {
  LayerRun out;
  switch (spec.layer) {
    case NormKind::bn: {
      auto [y, cache] = bn_forward_train(x, state);
      if (dy) out.grads = bn_backward(*dy, cache, state);
      out.y = std::move(y);
      break;
    }
    case NormKind::gn: {
      auto [y, cache] = group_norm_forward_train(x, state);
      if (dy) out.grads = group_norm_backward(*dy, cache, state);
      out.y = std::move(y);
      break;
    }
    case NormKind::cn: {
      auto [y, cache] = cn_forward_train(x, state);
      if (dy) out.grads = cn_backward(*dy, cache, state);
      out.y = std::move(y);
      break;
    }
    case NormKind::tbbn: {
      const std::size_t current = spec.current ? spec.current : x.n();
      const BatchComposition comp{current, x.n() - current, spec.task};
      auto [y, cache] = tbbn_forward_train(x, comp, state);
      if (dy) out.grads = tbbn_backward(*dy, cache, state);
      out.y = std::move(y);
      break;
    }
  }
  return out;
}

}  // namespace

GradReport check_layer(const LayerCheckSpec& spec) {
  const Shape shape = spec.shape;
  if (spec.layer == NormKind::tbbn && spec.current != 0 &&
      spec.current + spec.exemplar != shape.n) {
    throw ConfigError("gradcheck: B_c + B_p must equal N");
  }
  Rng rng(spec.seed);
  Tensor x(shape);
  for (double& v : x.data()) v = rng.normal(0.5, 1.5);
  Tensor weights(shape);
  for (double& v : weights.data()) v = rng.normal();

  NormLayerState base(shape.c);
  base.groups = spec.groups;
  base.ablation = spec.ablation;
  for (std::size_t c = 0; c < shape.c; ++c) {
    base.gamma[c] = rng.uniform(0.5, 1.5);
    base.beta[c] = rng.normal(0.0, 0.5);
  }

  const std::size_t nx = x.size();
  const std::size_t nc = shape.c;
  std::vector<double> params(nx + 2 * nc);
  std::copy(x.data().begin(), x.data().end(), params.begin());
  std::copy(base.gamma.begin(), base.gamma.end(), params.begin() + nx);
  std::copy(base.beta.begin(), base.beta.end(), params.begin() + nx + nc);

  auto unpack = [&](std::span<const double> p, Tensor& xt, NormLayerState& st) {
    std::copy(p.begin(), p.begin() + nx, xt.data().begin());
    std::copy(p.begin() + nx, p.begin() + nx + nc, st.gamma.begin());
    std::copy(p.begin() + nx + nc, p.end(), st.beta.begin());
  };

  const ScalarFn loss = [&](std::span<const double> p) {
    Tensor xt(shape);
    NormLayerState st = base;
    unpack(p, xt, st);
    const LayerRun run = run_layer(spec, xt, st, nullptr);
    // Extended accumulation keeps the reduction's rounding below the layer's,
    // which matters for entries whose gradient is near zero.
    long double total = 0.0L;
    for (std::size_t i = 0; i < run.y.size(); ++i) {
      total += static_cast<long double>(weights[i]) * run.y[i];
    }
    return static_cast<double>(total);
  };

  const LayerRun run = run_layer(spec, x, base, &weights);
  std::vector<double> analytic(params.size());
  std::copy(run.grads.dx.data().begin(), run.grads.dx.data().end(),
            analytic.begin());
  std::copy(run.grads.dgamma.begin(), run.grads.dgamma.end(),
            analytic.begin() + nx);
  std::copy(run.grads.dbeta.begin(), run.grads.dbeta.end(),
            analytic.begin() + nx + nc);

  const std::vector<ParamBlock> blocks{
      {"input", 0, nx}, {"gamma", nx, nc}, {"beta", nx + nc, nc}};
  return check_gradients(loss, params, analytic, blocks, spec.step,
                         spec.threshold);
}

nlohmann::json to_json(const GradReport& report) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : report.blocks) {
    blocks.push_back({{"name", b.name},
                      {"max_rel_error", b.max_rel_error},
                      {"mean_rel_error", b.mean_rel_error},
                      {"count", b.count}});
  }
  return {{"blocks", blocks},
          {"step", report.step},
          {"threshold", report.threshold},
          {"max_rel_error", report.max_rel_error()},
          {"passed", report.passed}};
}

}  // namespace tbnorm
