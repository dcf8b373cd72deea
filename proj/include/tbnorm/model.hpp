#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tbnorm/norm.hpp"
#include "tbnorm/rng.hpp"
#include "tbnorm/tensor.hpp"

namespace tbnorm {

enum class Architecture { mlp, conv };

std::string to_string(Architecture a);
Architecture parse_architecture(const std::string& name);

struct ModelSpec {
  Architecture arch = Architecture::mlp;
  /// Per-sample input shape (n ignored).
  Shape input{1, 16, 1, 1};
  /// Block widths: features for mlp, channels for conv.
  std::vector<std::size_t> hidden{32, 32};
  NormKind norm = NormKind::bn;
  std::size_t groups = 4;
  AblationFlags ablation{};
  bool bessel = false;
  double epsilon = 1e-5;
  double momentum = 0.1;
};

/// train: batch statistics, running statistics updated.
/// eval: running statistics, no caches kept.
/// frozen: running statistics, differentiable (caches kept).
enum class Mode { train, eval, frozen };

struct Linear {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w, b, dw, db;  // w is out x in, row-major
  Tensor input;
};

/// 3x3 convolution, stride 1, zero padding 1.
struct Conv2d {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w, b, dw, db;  // w is out x in x 3 x 3
  Tensor input;
};

struct NormLayer {
  struct Frozen {
    Tensor x;  // input of the batch-statistics stage
    std::optional<GnCache> gn;
  };
  using Cache =
      std::variant<std::monostate, BnCache, GnAffineCache, CnCache, TbbnCache, Frozen>;

  NormKind kind = NormKind::bn;
  NormLayerState state;
  std::vector<double> dgamma, dbeta;
  Cache cache;
};

struct Relu {
  std::vector<unsigned char> mask;
};

/// 2x2 average pooling with stride 2; odd trailing rows/columns are dropped.
struct AvgPool2 {
  Shape in_shape{};
};

using Layer = std::variant<Linear, Conv2d, NormLayer, Relu, AvgPool2>;

enum class ParamRole { weight, norm_affine, head };

/// Mutable view of one parameter array and its gradient.
struct ParamView {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
  ParamRole role;
};

struct BufferView {
  std::string name;
  std::span<double> value;
};

/// Small feed-forward classifier: blocks of (linear|conv) -> norm -> ReLU
/// (-> 2x2 average pool for conv), then a linear head whose width grows as
/// classes arrive.
class TinyModel {
 public:
  TinyModel(const ModelSpec& spec, std::size_t classes, Rng& rng);

  /// Logits (N, classes, 1, 1). `comp` describes the batch for TBBN layers in
  /// train mode; an empty composition means all rows are current (task 1).
  Tensor forward(const Tensor& x, Mode mode, BatchComposition comp = {});
  /// Runs layer `index` alone.
  Tensor forward_layer(std::size_t index, const Tensor& x, Mode mode,
                       const BatchComposition& comp = {});
  /// Accumulates parameter gradients from the last train/frozen forward and
  /// returns the input gradient.
  Tensor backward(const Tensor& dlogits);
  void zero_grad();

  /// Appends `extra` classifier rows: weights random, biases zero. Existing
  /// rows are untouched.
  void grow_head(std::size_t extra, Rng& rng);
  std::size_t num_classes() const;

  std::vector<ParamView> parameters();
  std::vector<BufferView> buffers();
  std::vector<NormLayerState*> norm_states();

  const ModelSpec& spec() const { return spec_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Builds an architecture skeleton with `classes` outputs and zeroed
  /// parameters, e.g. to be filled from a checkpoint.
  static TinyModel skeleton(const ModelSpec& spec, std::size_t classes);

 private:
  TinyModel() = default;
  void build(std::size_t classes, Rng* rng);
  Linear& head();

  ModelSpec spec_;
  std::vector<Layer> layers_;
};

// Layer kernels, exposed for testing.

Tensor linear_forward(Linear& layer, const Tensor& x, bool keep_input);
Tensor linear_backward(Linear& layer, const Tensor& dy);
Tensor conv_forward(Conv2d& layer, const Tensor& x, bool keep_input);
Tensor conv_backward(Conv2d& layer, const Tensor& dy);
Tensor norm_forward(NormLayer& layer, const Tensor& x, Mode mode,
                    const BatchComposition& comp);
Tensor norm_backward(NormLayer& layer, const Tensor& dy);

}  // namespace tbnorm
