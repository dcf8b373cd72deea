#include "tbnorm/norm.hpp"

#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tbnorm/errors.hpp"

namespace tbnorm {

namespace {

struct NormalizeResult {
  Tensor xhat;
  Tensor y;
  std::vector<double> inv_std;
};

// xhat = (x - mean) / sqrt(var + eps), y = gamma * xhat + beta, per channel.
NormalizeResult normalize_affine(const Tensor& x, std::span<const double> mean,
                                 std::span<const double> var, double epsilon,
                                 std::span<const double> gamma,
                                 std::span<const double> beta) {
  NormalizeResult out{Tensor(x.shape()), Tensor(x.shape()),
                      std::vector<double>(x.c())};
  for (std::size_t c = 0; c < x.c(); ++c) {
    out.inv_std[c] = 1.0 / std::sqrt(var[c] + epsilon);
  }
  for (std::size_t b = 0; b < x.n(); ++b) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      auto src = x.plane(b, c);
      auto xh = out.xhat.plane(b, c);
      auto y = out.y.plane(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        xh[i] = (src[i] - mean[c]) * out.inv_std[c];
        y[i] = gamma[c] * xh[i] + beta[c];
      }
    }
  }
  return out;
}

struct NormalizeGrads {
  Tensor dx;                   // through xhat with the statistics held fixed
  std::vector<double> dmean;   // dL/dmean used for normalization
  std::vector<double> dvar;    // dL/dvar used for normalization
  std::vector<double> dgamma;
  std::vector<double> dbeta;
};

NormalizeGrads normalize_backward(const Tensor& x, const Tensor& xhat,
                                  std::span<const double> inv_std,
                                  std::span<const double> gamma,
                                  const Tensor& dy) {
  const std::size_t channels = x.c();
  NormalizeGrads g{Tensor(x.shape()), std::vector<double>(channels, 0.0),
                   std::vector<double>(channels, 0.0),
                   std::vector<double>(channels, 0.0),
                   std::vector<double>(channels, 0.0)};
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t b = 0; b < x.n(); ++b) {
      auto d = dy.plane(b, c);
      auto xh = xhat.plane(b, c);
      auto out = g.dx.plane(b, c);
      for (std::size_t i = 0; i < d.size(); ++i) {
        g.dgamma[c] += d[i] * xh[i];
        g.dbeta[c] += d[i];
        const double dxhat = d[i] * gamma[c];
        out[i] = dxhat * inv_std[c];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xh[i];
      }
    }
    // xhat = (x - m) * s with s = (v + eps)^(-1/2):
    //   dL/dm = -s * sum(dxhat),  dL/dv = -1/2 * s^2 * sum(dxhat * xhat).
    g.dmean[c] = -inv_std[c] * sum_dxhat;
    g.dvar[c] = -0.5 * inv_std[c] * inv_std[c] * sum_dxhat_xhat;
  }
  return g;
}

// Adds the contribution of mean = avg(x) and var = avg((x - mean)^2) to dx.
void add_stats_gradient(const Tensor& x, std::span<const double> mean,
                        std::span<const double> dmean,
                        std::span<const double> dvar, Tensor& dx) {
  const auto count = static_cast<double>(x.n() * x.spatial());
  for (std::size_t b = 0; b < x.n(); ++b) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      auto src = x.plane(b, c);
      auto out = dx.plane(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        out[i] += dmean[c] / count + dvar[c] * 2.0 * (src[i] - mean[c]) / count;
      }
    }
  }
}

void update_running(NormLayerState& state, std::span<const double> mean,
                    std::span<const double> var, std::size_t reduction_size) {
  const double alpha = state.momentum;
  double keep = 1.0;
  if (state.bessel_on_running_var) {
    const auto v = static_cast<double>(reduction_size);
    keep = (v - 1.0) / v;
  }
  for (std::size_t c = 0; c < state.channels(); ++c) {
    state.running_mean[c] = (1.0 - alpha) * state.running_mean[c] + alpha * mean[c];
    state.running_var[c] =
        (1.0 - alpha) * keep * state.running_var[c] + alpha * var[c];
  }
}

void check_channels(const Tensor& x, const NormLayerState& state,
                    const char* op) {
  if (x.c() != state.channels()) {
    std::ostringstream msg;
    msg << op << ": input has " << x.c() << " channels, layer has "
        << state.channels();
    throw std::invalid_argument(msg.str());
  }
}

void check_reduction(const Tensor& x, const char* op) {
  if (x.n() * x.spatial() < 2) {
    throw std::invalid_argument(std::string(op) +
                                ": need at least 2 values per channel, got " +
                                to_string(x.shape()));
  }
}

void check_dy(const Tensor& dy, const Shape& expected, const char* op) {
  if (dy.shape() != expected) {
    throw std::invalid_argument(std::string(op) + ": gradient shape " +
                                to_string(dy.shape()) + " != " +
                                to_string(expected));
  }
}

void mark_consumed(bool& flag, const char* op) {
  if (flag) {
    throw std::logic_error(std::string(op) + ": backward cache already consumed");
  }
  flag = true;
}

std::vector<double> scaled(std::span<const double> v, double s) {
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x *= s;
  return out;
}

// Adjoint of the balanced-batch construction: current part through
// reshape_merge, exemplar part summed over the r channel blocks.
Tensor unbalance_adjoint(const Tensor& dh, std::size_t split_rows,
                         std::size_t r) {
  auto [dc, dp] = split_batch(dh, split_rows);
  return concat_batch(reshape_merge(dc, r), sum_channel_groups(dp, r));
}

}  // namespace

AblationFlags AblationFlags::ablation_case(int index) {
  switch (index) {
    case 1: return {false, true, true};
    case 2: return {true, false, true};
    case 3: return {true, true, false};
    case 4: return {false, false, true};
    default:
      throw std::invalid_argument("ablation case must be 1..4, got " +
                                  std::to_string(index));
  }
}

NormLayerState::NormLayerState(std::size_t channels)
    : gamma(channels, 1.0),
      beta(channels, 0.0),
      running_mean(channels, 0.0),
      running_var(channels, 1.0) {}

std::size_t compute_r(std::size_t current, std::size_t exemplar,
                      std::size_t task) {
  if (task == 0) throw std::invalid_argument("compute_r: task index is 1-based");
  if (task == 1) return 1;
  if (exemplar == 0) {
    throw std::invalid_argument("compute_r: B_p = 0 with t = " +
                                std::to_string(task));
  }
  const std::size_t numerator = current * (task - 1);
  if (numerator % exemplar != 0) {
    std::ostringstream msg;
    msg << "compute_r: B_c * (t-1) / B_p = " << numerator << "/" << exemplar
        << " is not an integer (B_c=" << current << ", B_p=" << exemplar
        << ", t=" << task << ")";
    throw std::invalid_argument(msg.str());
  }
  return numerator / exemplar;
}

std::size_t feasible_r(std::size_t current, std::size_t exemplar,
                       std::size_t r) {
  if (r == 0) throw std::invalid_argument("feasible_r: r must be positive");
  // With no exemplar rows every divisor of B_c is a common divisor.
  const std::size_t g = std::gcd(current, exemplar);
  for (std::size_t candidate = r; candidate > 1; --candidate) {
    if (g % candidate == 0) return candidate;
  }
  return 1;
}

// ---------------------------------------------------------------------------

std::pair<Tensor, BnCache> bn_forward_train(const Tensor& x,
                                            NormLayerState& state) {
  check_channels(x, state, "bn_forward_train");
  check_reduction(x, "bn_forward_train");
  const ChannelStats stats = channel_stats(x);
  auto res = normalize_affine(x, stats.mean, stats.var, state.epsilon,
                              state.gamma, state.beta);
  update_running(state, stats.mean, stats.var, x.n() * x.spatial());
  BnCache cache;
  cache.x_ = x;
  cache.xhat_ = std::move(res.xhat);
  cache.mean_ = stats.mean;
  cache.inv_std_ = std::move(res.inv_std);
  return {std::move(res.y), std::move(cache)};
}

Tensor bn_forward_eval(const Tensor& x, const NormLayerState& state) {
  check_channels(x, state, "bn_forward_eval");
  return normalize_affine(x, state.running_mean, state.running_var,
                          state.epsilon, state.gamma, state.beta)
      .y;
}

NormGrads bn_backward(const Tensor& dy, BnCache& cache,
                      const NormLayerState& state) {
  mark_consumed(cache.consumed_, "bn_backward");
  check_dy(dy, cache.x_.shape(), "bn_backward");
  auto g = normalize_backward(cache.x_, cache.xhat_, cache.inv_std_,
                              state.gamma, dy);
  add_stats_gradient(cache.x_, cache.mean_, g.dmean, g.dvar, g.dx);
  return {std::move(g.dx), std::move(g.dgamma), std::move(g.dbeta)};
}

NormGrads bn_backward_eval(const Tensor& x, const Tensor& dy,
                           const NormLayerState& state) {
  check_channels(x, state, "bn_backward_eval");
  check_dy(dy, x.shape(), "bn_backward_eval");
  auto res = normalize_affine(x, state.running_mean, state.running_var,
                              state.epsilon, state.gamma, state.beta);
  auto g = normalize_backward(x, res.xhat, res.inv_std, state.gamma, dy);
  return {std::move(g.dx), std::move(g.dgamma), std::move(g.dbeta)};
}

// ---------------------------------------------------------------------------

std::pair<Tensor, GnCache> gn_forward_train(const Tensor& x,
                                            std::size_t groups,
                                            double epsilon) {
  if (groups == 0 || x.c() % groups != 0) {
    std::ostringstream msg;
    msg << "group norm: G=" << groups << " does not divide C=" << x.c();
    throw std::invalid_argument(msg.str());
  }
  const std::size_t per_group = x.c() / groups;
  const auto count = static_cast<double>(per_group * x.spatial());
  GnCache cache;
  cache.groups_ = groups;
  cache.xhat_ = Tensor(x.shape());
  cache.inv_std_.assign(x.n() * groups, 0.0);
  for (std::size_t b = 0; b < x.n(); ++b) {
    for (std::size_t g = 0; g < groups; ++g) {
      double sum = 0.0;
      for (std::size_t c = g * per_group; c < (g + 1) * per_group; ++c) {
        for (double v : x.plane(b, c)) sum += v;
      }
      const double mean = sum / count;
      double sq = 0.0;
      for (std::size_t c = g * per_group; c < (g + 1) * per_group; ++c) {
        for (double v : x.plane(b, c)) sq += (v - mean) * (v - mean);
      }
      const double inv_std = 1.0 / std::sqrt(sq / count + epsilon);
      cache.inv_std_[b * groups + g] = inv_std;
      for (std::size_t c = g * per_group; c < (g + 1) * per_group; ++c) {
        auto src = x.plane(b, c);
        auto dst = cache.xhat_.plane(b, c);
        for (std::size_t i = 0; i < src.size(); ++i) {
          dst[i] = (src[i] - mean) * inv_std;
        }
      }
    }
  }
  Tensor y = cache.xhat_;
  return {std::move(y), std::move(cache)};
}

Tensor gn_forward(const Tensor& x, std::size_t groups, double epsilon) {
  return gn_forward_train(x, groups, epsilon).first;
}

Tensor gn_backward(const Tensor& dy, GnCache& cache) {
  mark_consumed(cache.consumed_, "gn_backward");
  const Tensor& xhat = cache.xhat_;
  check_dy(dy, xhat.shape(), "gn_backward");
  const std::size_t groups = cache.groups_;
  const std::size_t per_group = xhat.c() / groups;
  const auto count = static_cast<double>(per_group * xhat.spatial());
  Tensor dx(xhat.shape());
  for (std::size_t b = 0; b < xhat.n(); ++b) {
    for (std::size_t g = 0; g < groups; ++g) {
      double sum_dy = 0.0;
      double sum_dy_xhat = 0.0;
      for (std::size_t c = g * per_group; c < (g + 1) * per_group; ++c) {
        auto d = dy.plane(b, c);
        auto xh = xhat.plane(b, c);
        for (std::size_t i = 0; i < d.size(); ++i) {
          sum_dy += d[i];
          sum_dy_xhat += d[i] * xh[i];
        }
      }
      const double inv_std = cache.inv_std_[b * groups + g];
      for (std::size_t c = g * per_group; c < (g + 1) * per_group; ++c) {
        auto d = dy.plane(b, c);
        auto xh = xhat.plane(b, c);
        auto out = dx.plane(b, c);
        for (std::size_t i = 0; i < d.size(); ++i) {
          out[i] = inv_std * (d[i] - sum_dy / count - xh[i] * sum_dy_xhat / count);
        }
      }
    }
  }
  return dx;
}

std::pair<Tensor, GnAffineCache> group_norm_forward_train(
    const Tensor& x, const NormLayerState& state) {
  check_channels(x, state, "group_norm_forward_train");
  auto [xhat, gn] = gn_forward_train(x, state.groups, state.epsilon);
  Tensor y(x.shape());
  for (std::size_t b = 0; b < x.n(); ++b) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      auto src = xhat.plane(b, c);
      auto dst = y.plane(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = state.gamma[c] * src[i] + state.beta[c];
      }
    }
  }
  GnAffineCache cache;
  cache.gn_ = std::move(gn);
  cache.xhat_ = std::move(xhat);
  return {std::move(y), std::move(cache)};
}

Tensor group_norm_forward_eval(const Tensor& x, const NormLayerState& state) {
  return group_norm_forward_train(x, state).first;
}

NormGrads group_norm_backward(const Tensor& dy, GnAffineCache& cache,
                              const NormLayerState& state) {
  mark_consumed(cache.consumed_, "group_norm_backward");
  const Tensor& xhat = cache.xhat_;
  check_dy(dy, xhat.shape(), "group_norm_backward");
  NormGrads g{Tensor(xhat.shape()),
              std::vector<double>(xhat.c(), 0.0),
              std::vector<double>(xhat.c(), 0.0)};
  Tensor dxhat(xhat.shape());
  for (std::size_t b = 0; b < xhat.n(); ++b) {
    for (std::size_t c = 0; c < xhat.c(); ++c) {
      auto d = dy.plane(b, c);
      auto xh = xhat.plane(b, c);
      auto out = dxhat.plane(b, c);
      for (std::size_t i = 0; i < d.size(); ++i) {
        g.dgamma[c] += d[i] * xh[i];
        g.dbeta[c] += d[i];
        out[i] = d[i] * state.gamma[c];
      }
    }
  }
  g.dx = gn_backward(dxhat, cache.gn_);
  return g;
}

// ---------------------------------------------------------------------------

std::pair<Tensor, CnCache> cn_forward_train(const Tensor& x,
                                            NormLayerState& state) {
  check_channels(x, state, "cn_forward_train");
  auto [z, gn] = gn_forward_train(x, state.groups, state.epsilon);
  auto [y, bn] = bn_forward_train(z, state);
  CnCache cache;
  cache.gn_ = std::move(gn);
  cache.bn_ = std::move(bn);
  return {std::move(y), std::move(cache)};
}

Tensor cn_forward_eval(const Tensor& x, const NormLayerState& state) {
  check_channels(x, state, "cn_forward_eval");
  return bn_forward_eval(gn_forward(x, state.groups, state.epsilon), state);
}

NormGrads cn_backward(const Tensor& dy, CnCache& cache,
                      const NormLayerState& state) {
  mark_consumed(cache.consumed_, "cn_backward");
  NormGrads g = bn_backward(dy, cache.bn_, state);
  g.dx = gn_backward(g.dx, cache.gn_);
  return g;
}

// ---------------------------------------------------------------------------

std::pair<Tensor, TbbnCache> tbbn_forward_train(const Tensor& x,
                                                const BatchComposition& comp,
                                                NormLayerState& state) {
  check_channels(x, state, "tbbn_forward_train");
  if (comp.total() != x.n()) {
    std::ostringstream msg;
    msg << "tbbn_forward_train: B_c + B_p = " << comp.total()
        << " but batch has " << x.n() << " rows";
    throw std::invalid_argument(msg.str());
  }
  if (comp.current == 0) {
    throw std::invalid_argument("tbbn_forward_train: B_c must be positive");
  }
  TbbnCache cache;
  cache.flags_ = state.ablation;
  if (comp.task >= 2 && comp.exemplar == 0) {
    std::clog << "warning: tbbn: empty exemplar part at task " << comp.task
              << ", falling back to batch normalization\n";
    auto [y, bn] = bn_forward_train(x, state);
    cache.vanilla_ = std::move(bn);
    return {std::move(y), std::move(cache)};
  }

  const std::size_t r =
      feasible_r(comp.current, comp.exemplar,
                 compute_r(comp.current, comp.exemplar, comp.task));
  if (comp.current % r != 0) {
    throw std::logic_error("tbbn_forward_train: r* does not divide B_c");
  }
  const std::size_t split_rows = comp.current / r;
  const AblationFlags& flags = state.ablation;
  cache.r_ = r;
  cache.current_ = comp.current;

  auto [xc, xp] = split_batch(x, comp.current);
  cache.h_ = concat_batch(reshape_split(xc, r), repeat_channels(xp, r));
  if (flags.balanced_stats_train || flags.balanced_stats_test) {
    check_reduction(cache.h_, "tbbn_forward_train");
    cache.balanced_ = channel_stats(cache.h_);
  }
  if (!flags.balanced_stats_train || !flags.balanced_stats_test) {
    check_reduction(x, "tbbn_forward_train");
    cache.plain_ = channel_stats(x);
  }

  Tensor y;
  if (flags.balanced_affine) {
    // Normalize and transform in the balanced layout, then un-balance.
    if (flags.balanced_stats_train) {
      cache.norm_mean_ = cache.balanced_.mean;
    } else {
      cache.norm_mean_ = tile(cache.plain_.mean, r);
    }
    const std::vector<double> var = flags.balanced_stats_train
                                        ? cache.balanced_.var
                                        : tile(cache.plain_.var, r);
    auto res = normalize_affine(cache.h_, cache.norm_mean_, var, state.epsilon,
                                tile(state.gamma, r), tile(state.beta, r));
    auto [yc, yp] = split_batch(res.y, split_rows);
    y = concat_batch(reshape_merge(yc, r), average_channel_groups(yp, r));
    cache.normalized_ = std::move(res.xhat);
    cache.norm_inv_std_ = std::move(res.inv_std);
  } else {
    // Normalize the original layout with split-averaged statistics.
    std::vector<double> var;
    if (flags.balanced_stats_train) {
      cache.norm_mean_ = average_blocks(cache.balanced_.mean, r);
      var = average_blocks(cache.balanced_.var, r);
    } else {
      cache.norm_mean_ = cache.plain_.mean;
      var = cache.plain_.var;
    }
    auto res = normalize_affine(x, cache.norm_mean_, var, state.epsilon,
                                state.gamma, state.beta);
    y = std::move(res.y);
    cache.normalized_ = std::move(res.xhat);
    cache.norm_inv_std_ = std::move(res.inv_std);
  }

  if (flags.balanced_stats_test) {
    update_running(state, average_blocks(cache.balanced_.mean, r),
                   average_blocks(cache.balanced_.var, r),
                   cache.h_.n() * cache.h_.spatial());
  } else {
    update_running(state, cache.plain_.mean, cache.plain_.var,
                   x.n() * x.spatial());
  }
  cache.x_ = x;
  return {std::move(y), std::move(cache)};
}

Tensor tbbn_forward_eval(const Tensor& x, const NormLayerState& state) {
  return bn_forward_eval(x, state);
}

NormGrads tbbn_backward(const Tensor& dy, TbbnCache& cache,
                        const NormLayerState& state) {
  mark_consumed(cache.consumed_, "tbbn_backward");
  if (cache.vanilla_) return bn_backward(dy, *cache.vanilla_, state);
  check_dy(dy, cache.x_.shape(), "tbbn_backward");

  const std::size_t r = cache.r_;
  const std::size_t split_rows = cache.current_ / r;
  const AblationFlags& flags = cache.flags_;

  if (flags.balanced_affine) {
    // Route the output gradient into the balanced layout: reshape for the
    // current part, r tiled copies scaled by 1/r for the exemplar part.
    auto [dyc, dyp] = split_batch(dy, cache.current_);
    Tensor dyp_tiled = repeat_channels(dyp, r);
    const auto denom = static_cast<double>(r);
    for (double& v : dyp_tiled.data()) v /= denom;
    const Tensor dh_out = concat_batch(reshape_split(dyc, r), dyp_tiled);

    auto g = normalize_backward(cache.h_, cache.normalized_,
                                cache.norm_inv_std_, tile(state.gamma, r),
                                dh_out);
    Tensor dh = std::move(g.dx);
    if (flags.balanced_stats_train) {
      add_stats_gradient(cache.h_, cache.norm_mean_, g.dmean, g.dvar, dh);
    }
    Tensor dx = unbalance_adjoint(dh, split_rows, r);
    if (!flags.balanced_stats_train) {
      add_stats_gradient(cache.x_, cache.plain_.mean, sum_blocks(g.dmean, r),
                         sum_blocks(g.dvar, r), dx);
    }
    return {std::move(dx), sum_blocks(g.dgamma, r), sum_blocks(g.dbeta, r)};
  }

  auto g = normalize_backward(cache.x_, cache.normalized_, cache.norm_inv_std_,
                              state.gamma, dy);
  Tensor dx = std::move(g.dx);
  if (flags.balanced_stats_train) {
    // Split averaging spreads each statistic gradient evenly over the r blocks.
    const double inv_r = 1.0 / static_cast<double>(r);
    Tensor dh(cache.h_.shape());
    add_stats_gradient(cache.h_, cache.balanced_.mean,
                       tile(scaled(g.dmean, inv_r), r),
                       tile(scaled(g.dvar, inv_r), r), dh);
    dx += unbalance_adjoint(dh, split_rows, r);
  } else {
    add_stats_gradient(cache.x_, cache.norm_mean_, g.dmean, g.dvar, dx);
  }
  return {std::move(dx), std::move(g.dgamma), std::move(g.dbeta)};
}

// ---------------------------------------------------------------------------

MeanBias expected_bn_mean_bias(const std::vector<std::vector<double>>& task_means,
                               std::size_t current, std::size_t exemplar,
                               std::size_t task) {
  if (task < 2) {
    throw std::invalid_argument("expected_bn_mean_bias: requires t >= 2");
  }
  if (task_means.size() != task) {
    throw std::invalid_argument("expected_bn_mean_bias: expected " +
                                std::to_string(task) + " task means, got " +
                                std::to_string(task_means.size()));
  }
  const std::size_t channels = task_means.front().size();
  const auto t = static_cast<double>(task);
  const auto bc = static_cast<double>(current);
  const auto bp = static_cast<double>(exemplar);
  const double batch = bc + bp;
  MeanBias out{std::vector<double>(channels, 0.0),
               std::vector<double>(channels, 0.0)};
  for (std::size_t c = 0; c < channels; ++c) {
    double all = 0.0;
    double previous = 0.0;
    for (std::size_t i = 0; i < task; ++i) {
      if (task_means[i].size() != channels) {
        throw std::invalid_argument("expected_bn_mean_bias: ragged task means");
      }
      all += task_means[i][c];
      if (i + 1 < task) previous += task_means[i][c];
    }
    const double current_mean = task_means[task - 1][c];
    const double population = all / t;
    const double expected_bn =
        (bc * current_mean + bp / (t - 1.0) * previous) / batch;
    out.derived[c] = population - expected_bn;
    out.printed[c] = (batch - bc * t) / (t * (t - 1.0) * batch) * all +
                     (bc * t - batch) / ((t - 1.0) * batch) * current_mean;
  }
  return out;
}

NormKind parse_norm_kind(const std::string& name) {
  if (name == "bn") return NormKind::bn;
  if (name == "gn") return NormKind::gn;
  if (name == "cn") return NormKind::cn;
  if (name == "tbbn") return NormKind::tbbn;
  throw ConfigError("unknown normalization kind '" + name + "' (expected bn|gn|cn|tbbn)");
}

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::bn: return "bn";
    case NormKind::gn: return "gn";
    case NormKind::cn: return "cn";
    case NormKind::tbbn: return "tbbn";
  }
  return "?";
}

}  // namespace tbnorm
