#include "tbnorm/model.hpp"

#include <cmath>
#include <stdexcept>

#include "tbnorm/errors.hpp"

namespace tbnorm {

std::string to_string(Architecture a) {
  return a == Architecture::mlp ? "mlp" : "conv";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "mlp") return Architecture::mlp;
  if (name == "conv") return Architecture::conv;
  throw ConfigError("unknown architecture '" + name + "' (expected mlp|conv)");
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void init_normal(std::vector<double>& v, double stddev, Rng* rng) {
  if (!rng) return;
  for (double& x : v) x = rng->normal(0.0, stddev);
}

Linear make_linear(std::size_t in, std::size_t out, double gain, Rng* rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.w.assign(in * out, 0.0);
  l.b.assign(out, 0.0);
  l.dw.assign(in * out, 0.0);
  l.db.assign(out, 0.0);
  init_normal(l.w, std::sqrt(gain / static_cast<double>(in)), rng);
  return l;
}

Conv2d make_conv(std::size_t in, std::size_t out, Rng* rng) {
  Conv2d l;
  l.in = in;
  l.out = out;
  l.w.assign(out * in * 9, 0.0);
  l.b.assign(out, 0.0);
  l.dw.assign(l.w.size(), 0.0);
  l.db.assign(out, 0.0);
  init_normal(l.w, std::sqrt(2.0 / static_cast<double>(in * 9)), rng);
  return l;
}

NormLayer make_norm(const ModelSpec& spec, std::size_t channels) {
  NormLayer n;
  n.kind = spec.norm;
  n.state = NormLayerState(channels);
  n.state.groups = spec.groups;
  n.state.ablation = spec.ablation;
  n.state.bessel_on_running_var = spec.bessel;
  n.state.epsilon = spec.epsilon;
  n.state.momentum = spec.momentum;
  n.dgamma.assign(channels, 0.0);
  n.dbeta.assign(channels, 0.0);
  if ((spec.norm == NormKind::gn || spec.norm == NormKind::cn) &&
      (spec.groups == 0 || channels % spec.groups != 0)) {
    throw ConfigError("groups=" + std::to_string(spec.groups) +
                      " does not divide width " + std::to_string(channels));
  }
  return n;
}

Tensor relu_forward(Relu& layer, const Tensor& x, bool keep) {
  Tensor y(x.shape());
  if (keep) layer.mask.assign(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool on = x[i] > 0.0;
    y[i] = on ? x[i] : 0.0;
    if (keep) layer.mask[i] = on;
  }
  return y;
}

Tensor relu_backward(Relu& layer, const Tensor& dy) {
  if (layer.mask.size() != dy.size()) throw std::logic_error("relu: no cached forward");
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = layer.mask[i] ? dy[i] : 0.0;
  return dx;
}

Tensor pool_forward(AvgPool2& layer, const Tensor& x) {
  layer.in_shape = x.shape();
  const std::size_t ho = x.h() / 2, wo = x.w() / 2;
  if (ho == 0 || wo == 0) throw std::invalid_argument("avgpool: input smaller than 2x2");
  Tensor y({x.n(), x.c(), ho, wo});
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j) {
          y(n, c, i, j) = 0.25 * (x(n, c, 2 * i, 2 * j) + x(n, c, 2 * i, 2 * j + 1) +
                                  x(n, c, 2 * i + 1, 2 * j) + x(n, c, 2 * i + 1, 2 * j + 1));
        }
  return y;
}

Tensor pool_backward(const AvgPool2& layer, const Tensor& dy) {
  Tensor dx(layer.in_shape);
  for (std::size_t n = 0; n < dy.n(); ++n)
    for (std::size_t c = 0; c < dy.c(); ++c)
      for (std::size_t i = 0; i < dy.h(); ++i)
        for (std::size_t j = 0; j < dy.w(); ++j) {
          const double g = 0.25 * dy(n, c, i, j);
          dx(n, c, 2 * i, 2 * j) = g;
          dx(n, c, 2 * i, 2 * j + 1) = g;
          dx(n, c, 2 * i + 1, 2 * j) = g;
          dx(n, c, 2 * i + 1, 2 * j + 1) = g;
        }
  return dx;
}

void accumulate(std::vector<double>& into, const std::vector<double>& g) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

}  // namespace

Tensor linear_forward(Linear& layer, const Tensor& x, bool keep_input) {
  const std::size_t in = x.c() * x.spatial();
  if (in != layer.in) {
    throw std::invalid_argument("linear: expected " + std::to_string(layer.in) +
                                " input features, got " + std::to_string(in));
  }
  Tensor y({x.n(), layer.out, 1, 1});
  for (std::size_t n = 0; n < x.n(); ++n) {
    const auto row = x.row(n);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = layer.w.data() + o * in;
      double s = layer.b[o];
      for (std::size_t i = 0; i < in; ++i) s += w[i] * row[i];
      y(n, o) = s;
    }
  }
  if (keep_input) layer.input = x;
  return y;
}

Tensor linear_backward(Linear& layer, const Tensor& dy) {
  const Tensor& x = layer.input;
  if (x.n() != dy.n()) throw std::logic_error("linear: no cached forward");
  const std::size_t in = layer.in;
  Tensor dx(x.shape());
  for (std::size_t n = 0; n < x.n(); ++n) {
    const auto row = x.row(n);
    double* dxr = dx.data().data() + n * in;
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double g = dy(n, o);
      if (g == 0.0) continue;
      layer.db[o] += g;
      double* dw = layer.dw.data() + o * in;
      const double* w = layer.w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        dw[i] += g * row[i];
        dxr[i] += g * w[i];
      }
    }
  }
  return dx;
}

Tensor conv_forward(Conv2d& layer, const Tensor& x, bool keep_input) {
  if (x.c() != layer.in) throw std::invalid_argument("conv: channel mismatch");
  const std::size_t H = x.h(), W = x.w();
  Tensor y({x.n(), layer.out, H, W});
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t o = 0; o < layer.out; ++o) {
      auto out = y.plane(n, o);
      for (double& v : out) v = layer.b[o];
      for (std::size_t i = 0; i < layer.in; ++i) {
        const auto in = x.plane(n, i);
        const double* k = layer.w.data() + (o * layer.in + i) * 9;
        for (std::size_t r = 0; r < H; ++r)
          for (std::size_t c = 0; c < W; ++c) {
            double s = 0.0;
            for (int ky = -1; ky <= 1; ++ky) {
              const long rr = static_cast<long>(r) + ky;
              if (rr < 0 || rr >= static_cast<long>(H)) continue;
              for (int kx = -1; kx <= 1; ++kx) {
                const long cc = static_cast<long>(c) + kx;
                if (cc < 0 || cc >= static_cast<long>(W)) continue;
                s += k[(ky + 1) * 3 + (kx + 1)] * in[rr * W + cc];
              }
            }
            out[r * W + c] += s;
          }
      }
    }
  if (keep_input) layer.input = x;
  return y;
}

Tensor conv_backward(Conv2d& layer, const Tensor& dy) {
  const Tensor& x = layer.input;
  if (x.n() != dy.n()) throw std::logic_error("conv: no cached forward");
  const std::size_t H = x.h(), W = x.w();
  Tensor dx(x.shape());
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t o = 0; o < layer.out; ++o) {
      const auto g = dy.plane(n, o);
      for (double v : g) layer.db[o] += v;
      for (std::size_t i = 0; i < layer.in; ++i) {
        const auto in = x.plane(n, i);
        auto din = dx.plane(n, i);
        const double* k = layer.w.data() + (o * layer.in + i) * 9;
        double* dk = layer.dw.data() + (o * layer.in + i) * 9;
        for (std::size_t r = 0; r < H; ++r)
          for (std::size_t c = 0; c < W; ++c) {
            const double gv = g[r * W + c];
            if (gv == 0.0) continue;
            for (int ky = -1; ky <= 1; ++ky) {
              const long rr = static_cast<long>(r) + ky;
              if (rr < 0 || rr >= static_cast<long>(H)) continue;
              for (int kx = -1; kx <= 1; ++kx) {
                const long cc = static_cast<long>(c) + kx;
                if (cc < 0 || cc >= static_cast<long>(W)) continue;
                const int ki = (ky + 1) * 3 + (kx + 1);
                dk[ki] += gv * in[rr * W + cc];
                din[rr * W + cc] += gv * k[ki];
              }
            }
          }
      }
    }
  return dx;
}

Tensor norm_forward(NormLayer& layer, const Tensor& x, Mode mode,
                    const BatchComposition& comp) {
  layer.cache = std::monostate{};
  NormLayerState& st = layer.state;
  if (mode == Mode::eval) {
    switch (layer.kind) {
      case NormKind::bn: return bn_forward_eval(x, st);
      case NormKind::gn: return group_norm_forward_eval(x, st);
      case NormKind::cn: return cn_forward_eval(x, st);
      case NormKind::tbbn: return tbbn_forward_eval(x, st);
    }
  }
  if (mode == Mode::frozen) {
    switch (layer.kind) {
      case NormKind::gn: {
        auto [y, cache] = group_norm_forward_train(x, st);
        layer.cache = std::move(cache);
        return y;
      }
      case NormKind::cn: {
        auto [z, gn] = gn_forward_train(x, st.groups, st.epsilon);
        Tensor y = bn_forward_eval(z, st);
        layer.cache = NormLayer::Frozen{std::move(z), std::move(gn)};
        return y;
      }
      case NormKind::bn:
      case NormKind::tbbn: {
        Tensor y = bn_forward_eval(x, st);
        layer.cache = NormLayer::Frozen{x, std::nullopt};
        return y;
      }
    }
  }
  switch (layer.kind) {
    case NormKind::bn: {
      auto [y, cache] = bn_forward_train(x, st);
      layer.cache = std::move(cache);
      return y;
    }
    case NormKind::gn: {
      auto [y, cache] = group_norm_forward_train(x, st);
      layer.cache = std::move(cache);
      return y;
    }
    case NormKind::cn: {
      auto [y, cache] = cn_forward_train(x, st);
      layer.cache = std::move(cache);
      return y;
    }
    case NormKind::tbbn: {
      BatchComposition c = comp;
      if (c.total() == 0) c = {x.n(), 0, 1};
      if (c.total() != x.n()) {
        throw std::invalid_argument("norm: batch composition does not match batch size");
      }
      auto [y, cache] = tbbn_forward_train(x, c, st);
      layer.cache = std::move(cache);
      return y;
    }
  }
  throw std::logic_error("norm: unknown kind");
}

Tensor norm_backward(NormLayer& layer, const Tensor& dy) {
  const NormLayerState& st = layer.state;
  NormGrads g = std::visit(
      overloaded{
          [](std::monostate&) -> NormGrads {
            throw std::logic_error("norm: backward without a cached forward");
          },
          [&](BnCache& c) { return bn_backward(dy, c, st); },
          [&](GnAffineCache& c) { return group_norm_backward(dy, c, st); },
          [&](CnCache& c) { return cn_backward(dy, c, st); },
          [&](TbbnCache& c) { return tbbn_backward(dy, c, st); },
          [&](NormLayer::Frozen& f) {
            NormGrads r = bn_backward_eval(f.x, dy, st);
            if (f.gn) r.dx = gn_backward(r.dx, *f.gn);
            return r;
          }},
      layer.cache);
  layer.cache = std::monostate{};
  accumulate(layer.dgamma, g.dgamma);
  accumulate(layer.dbeta, g.dbeta);
  return std::move(g.dx);
}

TinyModel::TinyModel(const ModelSpec& spec, std::size_t classes, Rng& rng)
    : spec_(spec) {
  build(classes, &rng);
}

TinyModel TinyModel::skeleton(const ModelSpec& spec, std::size_t classes) {
  TinyModel m;
  m.spec_ = spec;
  m.build(classes, nullptr);
  return m;
}

void TinyModel::build(std::size_t classes, Rng* rng) {
  if (spec_.hidden.empty()) throw ConfigError("model needs at least one hidden block");
  layers_.clear();
  Shape cur = spec_.input;
  cur.n = 1;
  for (std::size_t width : spec_.hidden) {
    if (width == 0) throw ConfigError("hidden width must be positive");
    if (spec_.arch == Architecture::mlp) {
      layers_.emplace_back(make_linear(cur.c * cur.spatial(), width, 2.0, rng));
      cur = {1, width, 1, 1};
    } else {
      layers_.emplace_back(make_conv(cur.c, width, rng));
      cur.c = width;
    }
    layers_.emplace_back(make_norm(spec_, width));
    layers_.emplace_back(Relu{});
    if (spec_.arch == Architecture::conv) {
      layers_.emplace_back(AvgPool2{});
      cur.h /= 2;
      cur.w /= 2;
      if (cur.h == 0 || cur.w == 0) throw ConfigError("input too small for the conv stack");
    }
  }
  layers_.emplace_back(make_linear(cur.c * cur.spatial(), classes, 1.0, rng));
}

Linear& TinyModel::head() { return std::get<Linear>(layers_.back()); }

std::size_t TinyModel::num_classes() const {
  return std::get<Linear>(layers_.back()).out;
}

void TinyModel::grow_head(std::size_t extra, Rng& rng) {
  Linear& h = head();
  const double sd = std::sqrt(1.0 / static_cast<double>(h.in));
  for (std::size_t k = 0; k < extra * h.in; ++k) h.w.push_back(rng.normal(0.0, sd));
  h.b.insert(h.b.end(), extra, 0.0);
  h.out += extra;
  h.dw.assign(h.w.size(), 0.0);
  h.db.assign(h.out, 0.0);
}

Tensor TinyModel::forward_layer(std::size_t index, const Tensor& x, Mode mode,
                                const BatchComposition& comp) {
  const bool keep = mode != Mode::eval;
  return std::visit(overloaded{
                        [&](Linear& l) { return linear_forward(l, x, keep); },
                        [&](Conv2d& l) { return conv_forward(l, x, keep); },
                        [&](NormLayer& l) { return norm_forward(l, x, mode, comp); },
                        [&](Relu& l) { return relu_forward(l, x, keep); },
                        [&](AvgPool2& l) { return pool_forward(l, x); }},
                    layers_.at(index));
}

Tensor TinyModel::forward(const Tensor& x, Mode mode, BatchComposition comp) {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) h = forward_layer(i, h, mode, comp);
  return h;
}

Tensor TinyModel::backward(const Tensor& dlogits) {
  Tensor g = dlogits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = std::visit(overloaded{
                       [&](Linear& l) { return linear_backward(l, g); },
                       [&](Conv2d& l) { return conv_backward(l, g); },
                       [&](NormLayer& l) { return norm_backward(l, g); },
                       [&](Relu& l) { return relu_backward(l, g); },
                       [&](AvgPool2& l) { return pool_backward(l, g); }},
                   *it);
  }
  return g;
}

void TinyModel::zero_grad() {
  for (auto& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::vector<ParamView> TinyModel::parameters() {
  std::vector<ParamView> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    const bool is_head = i + 1 == layers_.size();
    std::visit(overloaded{
                   [&](Linear& l) {
                     const ParamRole role = is_head ? ParamRole::head : ParamRole::weight;
                     out.push_back({prefix + "weight", l.w, l.dw, role});
                     out.push_back({prefix + "bias", l.b, l.db, role});
                   },
                   [&](Conv2d& l) {
                     out.push_back({prefix + "weight", l.w, l.dw, ParamRole::weight});
                     out.push_back({prefix + "bias", l.b, l.db, ParamRole::weight});
                   },
                   [&](NormLayer& l) {
                     out.push_back({prefix + "gamma", l.state.gamma, l.dgamma,
                                    ParamRole::norm_affine});
                     out.push_back({prefix + "beta", l.state.beta, l.dbeta,
                                    ParamRole::norm_affine});
                   },
                   [](auto&) {}},
               layers_[i]);
  }
  return out;
}

std::vector<BufferView> TinyModel::buffers() {
  std::vector<BufferView> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (auto* n = std::get_if<NormLayer>(&layers_[i])) {
      const std::string prefix = "layer" + std::to_string(i) + ".";
      out.push_back({prefix + "running_mean", n->state.running_mean});
      out.push_back({prefix + "running_var", n->state.running_var});
    }
  }
  return out;
}

std::vector<NormLayerState*> TinyModel::norm_states() {
  std::vector<NormLayerState*> out;
  for (auto& layer : layers_) {
    if (auto* n = std::get_if<NormLayer>(&layer)) out.push_back(&n->state);
  }
  return out;
}

}  // namespace tbnorm
