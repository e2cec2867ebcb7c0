#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dlgnet/tensor.hpp"

DLGNET_NAMESPACE_BEGIN

// Elementwise; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real factor);
Tensor one_minus(const Tensor& a);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Cross-correlation. x [N,Cin,H,W], weight [Cout,Cin,kh,kw] (odd extents),
/// bias [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride = 1,
              std::size_t pad = 0);

/// 2x2 max pooling with stride 2; H and W must be even.
Tensor max_pool2x2(const Tensor& x);

/// Bilinear resampling with half-pixel centers: src = (dst + 0.5) * in/out - 0.5,
/// clamped to the valid range.
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

/// Nearest-neighbor resampling (half-pixel centers). Not differentiable.
Tensor nearest_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
/// Gathers rows along axis 0; indices may repeat.
Tensor index_select(const Tensor& x, const std::vector<std::size_t>& indices);
Tensor reshape(const Tensor& x, Shape shape);

/// Numerically stable softmax along one axis.
Tensor softmax(const Tensor& x, std::size_t axis);

/// x [N,C,H,W] times a [N,1,H,W], broadcast over channels.
Tensor mul_channel_broadcast(const Tensor& x, const Tensor& a);

/// Sum over axis 0, keeping it with extent 1.
Tensor sum_axis0(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

inline constexpr double kBceClamp = 1e-7;

/// Mean binary cross-entropy; log arguments are clamped at kBceClamp.
Tensor bce_loss(const Tensor& prediction, const Tensor& target);
/// The same mean BCE as a double, without rounding to Real.
double bce_value(const Tensor& prediction, const Tensor& target);

/// While alive, records which side of every kink (ReLU sign, pooling winner,
/// BCE clamp) the ops on this thread take. Two evaluations with equal digests
/// ran through the same smooth piece of the function.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  std::uint64_t digest() const { return digest_; }
  void note(std::uint64_t v) { digest_ = (digest_ ^ v) * 0x100000001b3ull; }
  static BranchTrace* active();

 private:
  std::uint64_t digest_ = 0xcbf29ce484222325ull;
  BranchTrace* previous_;
};

DLGNET_NAMESPACE_END
