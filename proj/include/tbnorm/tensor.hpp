#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tbnorm {

/// Extents of a rank-4 batch x channel x height x width array.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t spatial() const { return h * w; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Dense rank-4 array of doubles in row-major n -> c -> h -> w order.
///
/// Flat index of (b, c, y, x) is ((b * C + c) * H + y) * W + x. A tensor with
/// n == 0 is valid and holds no data; reductions over it are errors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t spatial() const { return shape_.spatial(); }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t b, std::size_t c, std::size_t y = 0,
                    std::size_t x = 0) const {
    return ((b * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  double& operator()(std::size_t b, std::size_t c, std::size_t y = 0,
                     std::size_t x = 0) {
    return data_[index(b, c, y, x)];
  }
  double operator()(std::size_t b, std::size_t c, std::size_t y = 0,
                    std::size_t x = 0) const {
    return data_[index(b, c, y, x)];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  /// Contiguous H*W plane of sample b, channel c.
  std::span<double> plane(std::size_t b, std::size_t c) {
    return {data_.data() + index(b, c), shape_.spatial()};
  }
  std::span<const double> plane(std::size_t b, std::size_t c) const {
    return {data_.data() + index(b, c), shape_.spatial()};
  }

  /// All C*H*W values of sample b.
  std::span<const double> row(std::size_t b) const {
    const std::size_t len = shape_.c * shape_.spatial();
    return {data_.data() + b * len, len};
  }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  bool all_finite() const;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

/// Per-channel mean and biased variance.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> var;
};

// Layout operations used by the task-balanced batch construction. All of them
// copy; none of them alias the input.

/// (B, C, H, W) -> (B/r, C*r, H, W) by row-major reinterpretation. Sample b,
/// channel c lands at sample b / r, channel (b % r) * C + c.
Tensor reshape_split(const Tensor& x, std::size_t r);

/// Inverse of reshape_split: (B, C*r, H, W) -> (B*r, C, H, W).
Tensor reshape_merge(const Tensor& x, std::size_t r);

/// Tiles the channel axis r times: output channel k*C + c copies input channel c.
Tensor repeat_channels(const Tensor& x, std::size_t r);

/// (B, C*r, H, W) -> (B, C, H, W), averaging the r channel blocks.
Tensor average_channel_groups(const Tensor& x, std::size_t r);

/// (B, C*r, H, W) -> (B, C, H, W), summing the r channel blocks. Adjoint of
/// repeat_channels.
Tensor sum_channel_groups(const Tensor& x, std::size_t r);

Tensor concat_batch(const Tensor& a, const Tensor& b);

/// Rows [begin, end).
Tensor slice_batch(const Tensor& x, std::size_t begin, std::size_t end);

/// Splits into rows [0, at) and [at, n).
std::pair<Tensor, Tensor> split_batch(const Tensor& x, std::size_t at);

/// Mean and biased variance (divisor B*H*W) per channel.
ChannelStats channel_stats(const Tensor& x);

/// [v0..vC) -> [v0..vC, v0..vC, ...] r times.
std::vector<double> tile(std::span<const double> v, std::size_t r);

/// Sum of the r contiguous blocks of length v.size() / r.
std::vector<double> sum_blocks(std::span<const double> v, std::size_t r);

/// Mean of the r contiguous blocks of length v.size() / r.
std::vector<double> average_blocks(std::span<const double> v, std::size_t r);

}  // namespace tbnorm
