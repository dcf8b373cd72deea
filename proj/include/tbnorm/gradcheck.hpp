#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tbnorm/errors.hpp"
#include "tbnorm/norm.hpp"

namespace tbnorm {

/// A named contiguous range of the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct BlockReport {
  std::string name;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  std::size_t count = 0;
};

struct GradReport {
  std::vector<BlockReport> blocks;
  double step = 0.0;
  double threshold = 0.0;
  bool passed = false;

  double max_rel_error() const;
};

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

using ScalarFn = std::function<double(std::span<const double>)>;

/// Compares `analytic` against central differences
/// (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate of `params`.
/// Throws NumericError if f is non-finite at any probe point.
GradReport check_gradients(const ScalarFn& f, std::span<const double> params,
                           std::span<const double> analytic,
                           std::span<const ParamBlock> blocks,
                           double step = 1e-5, double threshold = 1e-4);

/// Single-block convenience overload.
GradReport check_gradients(const ScalarFn& f, std::span<const double> params,
                           std::span<const double> analytic,
                           double step = 1e-5, double threshold = 1e-4);

/// Setup for checking one normalization layer under the loss sum(w * y) with
/// fixed random weights w.
struct LayerCheckSpec {
  NormKind layer = NormKind::bn;
  Shape shape{8, 4, 3, 3};
  std::size_t task = 1;
  std::size_t current = 0;    // TBBN only; 0 means all rows
  std::size_t exemplar = 0;   // TBBN only
  std::size_t groups = 2;     // GN / CN
  AblationFlags ablation{};   // TBBN only
  std::uint64_t seed = 0;
  double step = 1e-5;
  double threshold = 1e-4;
};

/// Gradient check of the train-forward map with respect to the input, gamma
/// and beta. GN is checked as the GroupNorm layer with per-channel affine.
GradReport check_layer(const LayerCheckSpec& spec);

nlohmann::json to_json(const GradReport& report);

}  // namespace tbnorm
