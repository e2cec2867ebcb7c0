#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dlgnet/kernels.hpp"

DLGNET_NAMESPACE_BEGIN
namespace kernels {

ConvGeometry conv_geometry(const Shape& input, const Shape& weight, std::size_t stride,
                           std::size_t pad) {
  if (input.size() != 4) throw ShapeError("conv2d input must be [N,C,H,W], got " + to_string(input));
  if (weight.size() != 4)
    throw ShapeError("conv2d weight must be [Cout,Cin,kh,kw], got " + to_string(weight));
  if (input[1] != weight[1])
    throw ShapeError("conv2d channel mismatch: input " + to_string(input) + " vs weight " +
                     to_string(weight));
  if (weight[2] % 2 == 0 || weight[3] % 2 == 0)
    throw ShapeError("conv2d kernel extents must be odd, got " + to_string(weight));
  if (stride == 0) throw ShapeError("conv2d stride must be positive");
  if (input[2] + 2 * pad < weight[2] || input[3] + 2 * pad < weight[3])
    throw ShapeError("conv2d kernel " + to_string(weight) + " larger than padded input " +
                     to_string(input));
  ConvGeometry g;
  g.batch = input[0];
  g.in_channels = input[1];
  g.in_h = input[2];
  g.in_w = input[3];
  g.out_channels = weight[0];
  g.kernel_h = weight[2];
  g.kernel_w = weight[3];
  g.stride = stride;
  g.pad = pad;
  g.out_h = (g.in_h + 2 * pad - g.kernel_h) / stride + 1;
  g.out_w = (g.in_w + 2 * pad - g.kernel_w) / stride + 1;
  return g;
}

namespace serial {

namespace {

// Input coordinate for an output coordinate and kernel tap; negative or
// >= extent means the tap reads zero padding.
inline long tap(std::size_t out, std::size_t k, const ConvGeometry& g) {
  return static_cast<long>(out * g.stride + k) - static_cast<long>(g.pad);
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const Real> x, std::span<const Real> w,
                    std::span<const Real> b, std::span<Real> y) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          double acc = b.empty() ? 0.0 : b[co];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long iy = tap(oy, ky, g), ix = tap(ox, kx, g);
                if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
                acc += double(w[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx]) *
                       x[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
              }
          y[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox] = static_cast<Real>(acc);
        }
}

void conv2d_backward(const ConvGeometry& g, std::span<const Real> x, std::span<const Real> w,
                     std::span<const Real> dy, std::span<Real> dx, std::span<Real> dw,
                     std::span<Real> db) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const Real grad = dy[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox];
          if (!db.empty()) db[co] += grad;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long iy = tap(oy, ky, g), ix = tap(ox, kx, g);
                if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
                const std::size_t wi = ((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx;
                const std::size_t xi = ((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix;
                if (!dw.empty()) dw[wi] += grad * x[xi];
                if (!dx.empty()) dx[xi] += grad * w[wi];
              }
        }
}

void focal_attention_forward(const AttentionGeometry& g, const NeighborIndex& index,
                             std::span<const Real> query, std::span<const Real> key,
                             std::span<const Real> value, std::span<Real> out,
                             std::span<Real> alpha) {
  const std::size_t locs = index.locations(), slots = index.slots(), n = g.slices;
  std::vector<double> logits(slots * n);
  for (std::size_t p = 0; p < locs; ++p)
    for (std::size_t i = 0; i < n; ++i) {
      const Real* q = &query[(i * locs + p) * g.key_dim];
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < slots; ++s) {
        const auto nb = index.neighbor(p, s);
        if (nb < 0) continue;
        for (std::size_t j = 0; j < n; ++j) {
          const Real* k = &key[(j * locs + std::size_t(nb)) * g.key_dim];
          double e = 0;
          for (std::size_t c = 0; c < g.key_dim; ++c) e += double(q[c]) * k[c];
          logits[s * n + j] = e;
          peak = std::max(peak, e);
        }
      }
      double denom = 0;
      for (std::size_t s = 0; s < slots; ++s)
        if (index.valid(p, s))
          for (std::size_t j = 0; j < n; ++j) denom += std::exp(logits[s * n + j] - peak);
      Real* a = &alpha[(p * n + i) * slots * n];
      std::vector<double> acc(g.value_dim, 0.0);
      for (std::size_t s = 0; s < slots; ++s) {
        const auto nb = index.neighbor(p, s);
        for (std::size_t j = 0; j < n; ++j) {
          if (nb < 0) {
            a[s * n + j] = 0;
            continue;
          }
          const double weight = std::exp(logits[s * n + j] - peak) / denom;
          a[s * n + j] = static_cast<Real>(weight);
          const Real* v = &value[(j * locs + std::size_t(nb)) * g.value_dim];
          for (std::size_t c = 0; c < g.value_dim; ++c) acc[c] += weight * v[c];
        }
      }
      Real* o = &out[(i * locs + p) * g.value_dim];
      for (std::size_t c = 0; c < g.value_dim; ++c) o[c] = static_cast<Real>(acc[c]);
    }
}

void focal_attention_backward(const AttentionGeometry& g, const NeighborIndex& index,
                              std::span<const Real> query, std::span<const Real> key,
                              std::span<const Real> value, std::span<const Real> alpha,
                              std::span<const Real> dout, std::span<Real> dquery,
                              std::span<Real> dkey, std::span<Real> dvalue) {
  const std::size_t locs = index.locations(), slots = index.slots(), n = g.slices;
  std::vector<double> dalpha(slots * n);
  for (std::size_t p = 0; p < locs; ++p)
    for (std::size_t i = 0; i < n; ++i) {
      const Real* a = &alpha[(p * n + i) * slots * n];
      const Real* dm = &dout[(i * locs + p) * g.value_dim];
      double mean = 0;
      for (std::size_t s = 0; s < slots; ++s) {
        const auto nb = index.neighbor(p, s);
        if (nb < 0) continue;
        for (std::size_t j = 0; j < n; ++j) {
          const Real* v = &value[(j * locs + std::size_t(nb)) * g.value_dim];
          double d = 0;
          for (std::size_t c = 0; c < g.value_dim; ++c) d += double(dm[c]) * v[c];
          dalpha[s * n + j] = d;
          mean += a[s * n + j] * d;
        }
      }
      const Real* q = &query[(i * locs + p) * g.key_dim];
      for (std::size_t s = 0; s < slots; ++s) {
        const auto nb = index.neighbor(p, s);
        if (nb < 0) continue;
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t node = j * locs + std::size_t(nb);
          const double de = a[s * n + j] * (dalpha[s * n + j] - mean);
          for (std::size_t c = 0; c < g.key_dim; ++c) {
            if (!dquery.empty())
              dquery[(i * locs + p) * g.key_dim + c] += Real(de * key[node * g.key_dim + c]);
            if (!dkey.empty()) dkey[node * g.key_dim + c] += Real(de * q[c]);
          }
          if (!dvalue.empty())
            for (std::size_t c = 0; c < g.value_dim; ++c)
              dvalue[node * g.value_dim + c] += a[s * n + j] * dm[c];
        }
      }
    }
}

void guidance_attention_forward(const AttentionGeometry& g, const NeighborIndex& index,
                                std::span<const Real> target_score,
                                std::span<const Real> guide_score,
                                std::span<const Real> guide_value, std::span<Real> out,
                                std::span<Real> alpha) {
  const std::size_t locs = index.locations(), slots = index.slots(), n = g.slices;
  std::vector<double> logits(slots);
  for (std::size_t p = 0; p < locs; ++p)
    for (std::size_t i = 0; i < n; ++i) {
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < slots; ++s) {
        const auto nb = index.neighbor(p, s);
        if (nb < 0) continue;
        logits[s] = double(target_score[i * locs + p]) + guide_score[std::size_t(nb)];
        peak = std::max(peak, logits[s]);
      }
      double denom = 0;
      for (std::size_t s = 0; s < slots; ++s)
        if (index.valid(p, s)) denom += std::exp(logits[s] - peak);
      std::vector<double> acc(g.value_dim, 0.0);
      for (std::size_t s = 0; s < slots; ++s) {
        const auto nb = index.neighbor(p, s);
        Real& a = alpha[(p * n + i) * slots + s];
        if (nb < 0) {
          a = 0;
          continue;
        }
        const double weight = std::exp(logits[s] - peak) / denom;
        a = static_cast<Real>(weight);
        for (std::size_t c = 0; c < g.value_dim; ++c)
          acc[c] += weight * guide_value[std::size_t(nb) * g.value_dim + c];
      }
      for (std::size_t c = 0; c < g.value_dim; ++c)
        out[(i * locs + p) * g.value_dim + c] = static_cast<Real>(acc[c]);
    }
}

void guidance_attention_backward(const AttentionGeometry& g, const NeighborIndex& index,
                                 std::span<const Real> guide_value, std::span<const Real> alpha,
                                 std::span<const Real> dout, std::span<Real> dtarget_score,
                                 std::span<Real> dguide_score, std::span<Real> dguide_value) {
  const std::size_t locs = index.locations(), slots = index.slots(), n = g.slices;
  std::vector<double> dalpha(slots);
  for (std::size_t p = 0; p < locs; ++p)
    for (std::size_t i = 0; i < n; ++i) {
      const Real* a = &alpha[(p * n + i) * slots];
      const Real* dm = &dout[(i * locs + p) * g.value_dim];
      double mean = 0;
      for (std::size_t s = 0; s < slots; ++s) {
        const auto nb = index.neighbor(p, s);
        if (nb < 0) continue;
        double d = 0;
        for (std::size_t c = 0; c < g.value_dim; ++c)
          d += double(dm[c]) * guide_value[std::size_t(nb) * g.value_dim + c];
        dalpha[s] = d;
        mean += a[s] * d;
      }
      for (std::size_t s = 0; s < slots; ++s) {
        const auto nb = index.neighbor(p, s);
        if (nb < 0) continue;
        const double de = a[s] * (dalpha[s] - mean);
        if (!dtarget_score.empty()) dtarget_score[i * locs + p] += Real(de);
        if (!dguide_score.empty()) dguide_score[std::size_t(nb)] += Real(de);
        if (!dguide_value.empty())
          for (std::size_t c = 0; c < g.value_dim; ++c)
            dguide_value[std::size_t(nb) * g.value_dim + c] += a[s] * dm[c];
      }
    }
}

}  // namespace serial
}  // namespace kernels
DLGNET_NAMESPACE_END
