#include "tbnorm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tbnorm {

namespace {

void require_divides(std::size_t extent, std::size_t r, const char* op,
                     const char* extent_name) {
  if (r == 0) {
    throw std::invalid_argument(std::string(op) + ": r must be positive");
  }
  if (extent % r != 0) {
    std::ostringstream msg;
    msg << op << ": r=" << r << " does not divide " << extent_name << "="
        << extent;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

std::string to_string(const Shape& s) {
  std::ostringstream out;
  out << "(" << s.n << "," << s.c << "," << s.h << "," << s.w << ")";
  return out.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw std::invalid_argument("Tensor: data length " +
                                std::to_string(data_.size()) +
                                " does not match shape " + to_string(shape_));
  }
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw std::invalid_argument("Tensor +=: shape mismatch " +
                                to_string(shape_) + " vs " +
                                to_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor reshape_split(const Tensor& x, std::size_t r) {
  require_divides(x.n(), r, "reshape_split", "B_c");
  const Shape s = x.shape();
  std::vector<double> data(x.data().begin(), x.data().end());
  return Tensor({s.n / r, s.c * r, s.h, s.w}, std::move(data));
}

Tensor reshape_merge(const Tensor& x, std::size_t r) {
  require_divides(x.c(), r, "reshape_merge", "channels");
  const Shape s = x.shape();
  std::vector<double> data(x.data().begin(), x.data().end());
  return Tensor({s.n * r, s.c / r, s.h, s.w}, std::move(data));
}

Tensor repeat_channels(const Tensor& x, std::size_t r) {
  if (r == 0) throw std::invalid_argument("repeat_channels: r must be positive");
  const Shape s = x.shape();
  Tensor out({s.n, s.c * r, s.h, s.w});
  for (std::size_t b = 0; b < s.n; ++b) {
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t c = 0; c < s.c; ++c) {
        auto src = x.plane(b, c);
        std::copy(src.begin(), src.end(), out.plane(b, k * s.c + c).begin());
      }
    }
  }
  return out;
}

Tensor sum_channel_groups(const Tensor& x, std::size_t r) {
  require_divides(x.c(), r, "sum_channel_groups", "channels");
  const Shape s = x.shape();
  const std::size_t channels = s.c / r;
  Tensor out({s.n, channels, s.h, s.w});
  for (std::size_t b = 0; b < s.n; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      auto dst = out.plane(b, c);
      auto first = x.plane(b, c);
      std::copy(first.begin(), first.end(), dst.begin());
      for (std::size_t k = 1; k < r; ++k) {
        auto src = x.plane(b, k * channels + c);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
  }
  return out;
}

Tensor average_channel_groups(const Tensor& x, std::size_t r) {
  require_divides(x.c(), r, "average_channel_groups", "channels");
  Tensor out = sum_channel_groups(x, r);
  const auto denom = static_cast<double>(r);
  for (double& v : out.data()) v /= denom;
  return out;
}

Tensor concat_batch(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.c != sb.c || sa.h != sb.h || sa.w != sb.w) {
    throw std::invalid_argument("concat_batch: incompatible shapes " +
                                to_string(sa) + " and " + to_string(sb));
  }
  std::vector<double> data;
  data.reserve(a.size() + b.size());
  data.insert(data.end(), a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor({sa.n + sb.n, sa.c, sa.h, sa.w}, std::move(data));
}

Tensor slice_batch(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.n()) {
    throw std::out_of_range("slice_batch: rows [" + std::to_string(begin) +
                            "," + std::to_string(end) + ") out of range for " +
                            to_string(x.shape()));
  }
  const std::size_t row = x.c() * x.spatial();
  std::vector<double> data(x.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                           x.data().begin() + static_cast<std::ptrdiff_t>(end * row));
  return Tensor({end - begin, x.c(), x.h(), x.w()}, std::move(data));
}

std::pair<Tensor, Tensor> split_batch(const Tensor& x, std::size_t at) {
  return {slice_batch(x, 0, at), slice_batch(x, at, x.n())};
}

ChannelStats channel_stats(const Tensor& x) {
  const std::size_t count = x.n() * x.spatial();
  if (count == 0) {
    throw std::invalid_argument("channel_stats: empty reduction domain for " +
                                to_string(x.shape()));
  }
  ChannelStats stats{std::vector<double>(x.c(), 0.0),
                     std::vector<double>(x.c(), 0.0)};
  const auto denom = static_cast<double>(count);
  for (std::size_t c = 0; c < x.c(); ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < x.n(); ++b) {
      for (double v : x.plane(b, c)) sum += v;
    }
    const double mean = sum / denom;
    double sq = 0.0;
    for (std::size_t b = 0; b < x.n(); ++b) {
      for (double v : x.plane(b, c)) sq += (v - mean) * (v - mean);
    }
    stats.mean[c] = mean;
    stats.var[c] = sq / denom;
  }
  return stats;
}

std::vector<double> tile(std::span<const double> v, std::size_t r) {
  std::vector<double> out;
  out.reserve(v.size() * r);
  for (std::size_t k = 0; k < r; ++k) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<double> sum_blocks(std::span<const double> v, std::size_t r) {
  require_divides(v.size(), r, "sum_blocks", "length");
  const std::size_t len = v.size() / r;
  std::vector<double> out(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(len));
  for (std::size_t k = 1; k < r; ++k) {
    for (std::size_t i = 0; i < len; ++i) out[i] += v[k * len + i];
  }
  return out;
}

std::vector<double> average_blocks(std::span<const double> v, std::size_t r) {
  auto out = sum_blocks(v, r);
  const auto denom = static_cast<double>(r);
  for (double& x : out) x /= denom;
  return out;
}

}  // namespace tbnorm
