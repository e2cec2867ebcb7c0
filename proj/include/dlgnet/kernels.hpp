#pragma once

#include "dlgnet/namespace.hpp"

// Numeric kernels behind the differentiable ops. Each kernel exists twice:
//   serial::   straightforward loops, kept as the reference for tests;
//   parallel:: OpenMP implementation used by the ops.
// Parallel kernels give each output element exactly one writer and sum in a
// fixed order, so results do not depend on the thread count.

#include <cstddef>
#include <span>

#include "dlgnet/tensor.hpp"
#include "dlgnet/window.hpp"

DLGNET_NAMESPACE_BEGIN
namespace kernels {

struct ConvGeometry {
  std::size_t batch = 0, in_channels = 0, in_h = 0, in_w = 0;
  std::size_t out_channels = 0, kernel_h = 0, kernel_w = 0;
  std::size_t stride = 1, pad = 0;
  std::size_t out_h = 0, out_w = 0;
};

/// Validates shapes and derives the output extent. Throws ShapeError.
ConvGeometry conv_geometry(const Shape& input, const Shape& weight, std::size_t stride,
                           std::size_t pad);

/// Geometry of the two local graph attentions. Features are channel-last:
/// [slices][location][channel].
struct AttentionGeometry {
  std::size_t slices = 0;
  std::size_t key_dim = 0;
  std::size_t value_dim = 0;
};

namespace serial {

void conv2d_forward(const ConvGeometry& g, std::span<const Real> x, std::span<const Real> w,
                    std::span<const Real> b, std::span<Real> y);
/// Accumulates into dx/dw/db; an empty span skips that gradient.
void conv2d_backward(const ConvGeometry& g, std::span<const Real> x, std::span<const Real> w,
                     std::span<const Real> dy, std::span<Real> dx, std::span<Real> dw,
                     std::span<Real> db);

/// Focal-focal messages. For target (i, p) the support is every slice j at
/// p + offset(s) for all valid slots s. alpha is [loc][i][slot][j].
void focal_attention_forward(const AttentionGeometry& g, const NeighborIndex& index,
                             std::span<const Real> query, std::span<const Real> key,
                             std::span<const Real> value, std::span<Real> out,
                             std::span<Real> alpha);
void focal_attention_backward(const AttentionGeometry& g, const NeighborIndex& index,
                              std::span<const Real> query, std::span<const Real> key,
                              std::span<const Real> value, std::span<const Real> alpha,
                              std::span<const Real> dout, std::span<Real> dquery,
                              std::span<Real> dkey, std::span<Real> dvalue);

/// Focal-all messages. Logit for target (i, p) and guide node q is
/// target_score[i][p] + guide_score[q]; alpha is [loc][i][slot].
void guidance_attention_forward(const AttentionGeometry& g, const NeighborIndex& index,
                                std::span<const Real> target_score,
                                std::span<const Real> guide_score,
                                std::span<const Real> guide_value, std::span<Real> out,
                                std::span<Real> alpha);
void guidance_attention_backward(const AttentionGeometry& g, const NeighborIndex& index,
                                 std::span<const Real> guide_value, std::span<const Real> alpha,
                                 std::span<const Real> dout, std::span<Real> dtarget_score,
                                 std::span<Real> dguide_score, std::span<Real> dguide_value);

}  // namespace serial

namespace parallel {

void conv2d_forward(const ConvGeometry& g, std::span<const Real> x, std::span<const Real> w,
                    std::span<const Real> b, std::span<Real> y);
void conv2d_backward(const ConvGeometry& g, std::span<const Real> x, std::span<const Real> w,
                     std::span<const Real> dy, std::span<Real> dx, std::span<Real> dw,
                     std::span<Real> db);

void focal_attention_forward(const AttentionGeometry& g, const NeighborIndex& index,
                             std::span<const Real> query, std::span<const Real> key,
                             std::span<const Real> value, std::span<Real> out,
                             std::span<Real> alpha);
void focal_attention_backward(const AttentionGeometry& g, const NeighborIndex& index,
                              std::span<const Real> query, std::span<const Real> key,
                              std::span<const Real> value, std::span<const Real> alpha,
                              std::span<const Real> dout, std::span<Real> dquery,
                              std::span<Real> dkey, std::span<Real> dvalue);

void guidance_attention_forward(const AttentionGeometry& g, const NeighborIndex& index,
                                std::span<const Real> target_score,
                                std::span<const Real> guide_score,
                                std::span<const Real> guide_value, std::span<Real> out,
                                std::span<Real> alpha);
void guidance_attention_backward(const AttentionGeometry& g, const NeighborIndex& index,
                                 std::span<const Real> guide_value, std::span<const Real> alpha,
                                 std::span<const Real> dout, std::span<Real> dtarget_score,
                                 std::span<Real> dguide_score, std::span<Real> dguide_value);

}  // namespace parallel

/// Number of worker threads the parallel kernels may use.
int max_threads();
void set_threads(int n);

}  // namespace kernels
DLGNET_NAMESPACE_END
