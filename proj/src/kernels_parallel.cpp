#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dlgnet/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

DLGNET_NAMESPACE_BEGIN
namespace kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

namespace parallel {

namespace {

constexpr std::size_t kTile = 256;

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.pad == 0;
}

// cols[(ci*kh + ky)*kw + kx][oy*ow + ox]
void im2col(const ConvGeometry& g, const Real* x, Real* cols) {
  const std::size_t rows = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t plane = g.out_h * g.out_w;
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t ci = r / (g.kernel_h * g.kernel_w);
    const std::size_t ky = (r / g.kernel_w) % g.kernel_h;
    const std::size_t kx = r % g.kernel_w;
    Real* dst = cols + r * plane;
    const Real* src = x + ci * g.in_h * g.in_w;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      const long iy = long(oy * g.stride + ky) - long(g.pad);
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const long ix = long(ox * g.stride + kx) - long(g.pad);
        const bool inside = iy >= 0 && ix >= 0 && iy < long(g.in_h) && ix < long(g.in_w);
        dst[oy * g.out_w + ox] = inside ? src[iy * long(g.in_w) + ix] : Real(0);
      }
    }
  }
}

// Adds cols back into the image; one writer per input channel plane.
void col2im(const ConvGeometry& g, const Real* cols, Real* dx) {
  const std::size_t plane = g.out_h * g.out_w;
#pragma omp parallel for schedule(static)
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    Real* dst = dx + ci * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const Real* src = cols + ((ci * g.kernel_h + ky) * g.kernel_w + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = long(oy * g.stride + ky) - long(g.pad);
          if (iy < 0 || iy >= long(g.in_h)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = long(ox * g.stride + kx) - long(g.pad);
            if (ix < 0 || ix >= long(g.in_w)) continue;
            dst[iy * long(g.in_w) + ix] += src[oy * g.out_w + ox];
          }
        }
      }
  }
}

inline void axpy(std::size_t n, Real a, const Real* __restrict x, Real* __restrict y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const Real> x, std::span<const Real> w,
                    std::span<const Real> b, std::span<Real> y) {
  const std::size_t kdim = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t plane = g.out_h * g.out_w;
  const bool pointwise = is_pointwise(g);
  std::vector<Real> cols(pointwise ? 0 : kdim * plane);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const Real* src = x.data() + n * g.in_channels * g.in_h * g.in_w;
    if (!pointwise) {
      im2col(g, src, cols.data());
      src = cols.data();
    }
    Real* out = y.data() + n * g.out_channels * plane;
    const std::size_t tiles = (plane + kTile - 1) / kTile;
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t t = 0; t < tiles; ++t)
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        const std::size_t begin = t * kTile, len = std::min(kTile, plane - begin);
        Real* row = out + co * plane + begin;
        std::fill(row, row + len, b.empty() ? Real(0) : b[co]);
        const Real* wrow = w.data() + co * kdim;
        for (std::size_t k = 0; k < kdim; ++k) axpy(len, wrow[k], src + k * plane + begin, row);
      }
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const Real> x, std::span<const Real> w,
                     std::span<const Real> dy, std::span<Real> dx, std::span<Real> dw,
                     std::span<Real> db) {
  const std::size_t kdim = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t plane = g.out_h * g.out_w;
  const bool pointwise = is_pointwise(g);
  std::vector<Real> cols(pointwise || dw.empty() ? 0 : kdim * plane);
  std::vector<Real> cols_t(dw.empty() ? 0 : kdim * plane);
  std::vector<Real> dcols(pointwise || dx.empty() ? 0 : kdim * plane);

  for (std::size_t n = 0; n < g.batch; ++n) {
    const Real* grad = dy.data() + n * g.out_channels * plane;
    if (!db.empty())
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        Real acc = 0;
        for (std::size_t p = 0; p < plane; ++p) acc += grad[co * plane + p];
        db[co] += acc;
      }

    if (!dw.empty()) {
      const Real* src = x.data() + n * g.in_channels * g.in_h * g.in_w;
      if (!pointwise) {
        im2col(g, src, cols.data());
        src = cols.data();
      }
      // Transpose to [plane][kdim] so the weight gradient is a sequence of axpys.
#pragma omp parallel for schedule(static)
      for (std::size_t p = 0; p < plane; ++p)
        for (std::size_t k = 0; k < kdim; ++k) cols_t[p * kdim + k] = src[k * plane + p];
#pragma omp parallel for schedule(static)
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        Real* wrow = dw.data() + co * kdim;
        for (std::size_t p = 0; p < plane; ++p)
          axpy(kdim, grad[co * plane + p], cols_t.data() + p * kdim, wrow);
      }
    }

    if (!dx.empty()) {
      Real* target = pointwise ? dx.data() + n * g.in_channels * g.in_h * g.in_w : dcols.data();
      if (!pointwise) std::fill(dcols.begin(), dcols.end(), Real(0));
#pragma omp parallel for schedule(static)
      for (std::size_t k = 0; k < kdim; ++k) {
        Real* row = target + k * plane;
        for (std::size_t co = 0; co < g.out_channels; ++co)
          axpy(plane, w[co * kdim + k], grad + co * plane, row);
      }
      if (!pointwise) col2im(g, dcols.data(), dx.data() + n * g.in_channels * g.in_h * g.in_w);
    }
  }
}

void focal_attention_forward(const AttentionGeometry& g, const NeighborIndex& index,
                             std::span<const Real> query, std::span<const Real> key,
                             std::span<const Real> value, std::span<Real> out,
                             std::span<Real> alpha) {
  const std::size_t locs = index.locations(), slots = index.slots(), n = g.slices;
  const std::size_t cq = g.key_dim, cv = g.value_dim;
#pragma omp parallel
  {
    std::vector<double> logits(slots * n), acc(cv);
#pragma omp for schedule(static)
    for (std::size_t p = 0; p < locs; ++p)
      for (std::size_t i = 0; i < n; ++i) {
        const Real* q = query.data() + (i * locs + p) * cq;
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < slots; ++s) {
          const auto nb = index.neighbor(p, s);
          if (nb < 0) continue;
          for (std::size_t j = 0; j < n; ++j) {
            const Real* k = key.data() + (j * locs + std::size_t(nb)) * cq;
            double e = 0;
#pragma omp simd reduction(+ : e)
            for (std::size_t c = 0; c < cq; ++c) e += double(q[c]) * double(k[c]);
            logits[s * n + j] = e;
            peak = std::max(peak, e);
          }
        }
        double denom = 0;
        for (std::size_t s = 0; s < slots; ++s) {
          const bool ok = index.valid(p, s);
          for (std::size_t j = 0; j < n; ++j) {
            double& l = logits[s * n + j];
            l = ok ? std::exp(l - peak) : 0.0;
            denom += l;
          }
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        Real* a = alpha.data() + (p * n + i) * slots * n;
        for (std::size_t s = 0; s < slots; ++s) {
          const auto nb = index.neighbor(p, s);
          for (std::size_t j = 0; j < n; ++j) {
            const double weight = logits[s * n + j] / denom;
            a[s * n + j] = static_cast<Real>(weight);
            if (nb < 0) continue;
            const Real* v = value.data() + (j * locs + std::size_t(nb)) * cv;
            for (std::size_t c = 0; c < cv; ++c) acc[c] += weight * double(v[c]);
          }
        }
        Real* o = out.data() + (i * locs + p) * cv;
        for (std::size_t c = 0; c < cv; ++c) o[c] = static_cast<Real>(acc[c]);
      }
  }
}

void focal_attention_backward(const AttentionGeometry& g, const NeighborIndex& index,
                              std::span<const Real> query, std::span<const Real> key,
                              std::span<const Real> value, std::span<const Real> alpha,
                              std::span<const Real> dout, std::span<Real> dquery,
                              std::span<Real> dkey, std::span<Real> dvalue) {
  const std::size_t locs = index.locations(), slots = index.slots(), n = g.slices;
  const std::size_t cq = g.key_dim, cv = g.value_dim;
  const std::size_t per_loc = n * slots * n;
  std::vector<double> dlogit(locs * per_loc, 0.0);

  // Pass 1: softmax backward per target; dquery is owned by the target location.
#pragma omp parallel
  {
    std::vector<double> acc(cq);
#pragma omp for schedule(static)
    for (std::size_t p = 0; p < locs; ++p)
      for (std::size_t i = 0; i < n; ++i) {
        const Real* a = alpha.data() + (p * n + i) * slots * n;
        const Real* dm = dout.data() + (i * locs + p) * cv;
        double* de = dlogit.data() + p * per_loc + i * slots * n;
        double mean = 0;
        for (std::size_t s = 0; s < slots; ++s) {
          const auto nb = index.neighbor(p, s);
          if (nb < 0) continue;
          for (std::size_t j = 0; j < n; ++j) {
            const Real* v = value.data() + (j * locs + std::size_t(nb)) * cv;
            double d = 0;
#pragma omp simd reduction(+ : d)
            for (std::size_t c = 0; c < cv; ++c) d += double(dm[c]) * double(v[c]);
            de[s * n + j] = d;
            mean += a[s * n + j] * d;
          }
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t s = 0; s < slots; ++s) {
          const auto nb = index.neighbor(p, s);
          if (nb < 0) continue;
          for (std::size_t j = 0; j < n; ++j) {
            double& d = de[s * n + j];
            d = a[s * n + j] * (d - mean);
            const Real* k = key.data() + (j * locs + std::size_t(nb)) * cq;
            for (std::size_t c = 0; c < cq; ++c) acc[c] += d * double(k[c]);
          }
        }
        if (!dquery.empty()) {
          Real* dq = dquery.data() + (i * locs + p) * cq;
          for (std::size_t c = 0; c < cq; ++c) dq[c] += static_cast<Real>(acc[c]);
        }
      }
  }

  if (dkey.empty() && dvalue.empty()) return;
  // Pass 2: gather into each source node from the targets that attend to it.
  const auto h = long(index.height()), w = long(index.width());
  const auto offsets = index.offsets();
#pragma omp parallel
  {
    std::vector<double> kacc(cq), vacc(cv);
#pragma omp for schedule(static)
    for (std::size_t q = 0; q < locs; ++q) {
      const long qy = long(q) / w, qx = long(q) % w;
      for (std::size_t j = 0; j < n; ++j) {
        std::fill(kacc.begin(), kacc.end(), 0.0);
        std::fill(vacc.begin(), vacc.end(), 0.0);
        for (std::size_t s = 0; s < slots; ++s) {
          const long py = qy - offsets[s].dy, px = qx - offsets[s].dx;
          if (py < 0 || px < 0 || py >= h || px >= w) continue;
          const std::size_t p = std::size_t(py * w + px);
          for (std::size_t i = 0; i < n; ++i) {
            const double de = dlogit[p * per_loc + (i * slots + s) * n + j];
            const double a = alpha[(p * n + i) * slots * n + s * n + j];
            const Real* qv = query.data() + (i * locs + p) * cq;
            const Real* dm = dout.data() + (i * locs + p) * cv;
            for (std::size_t c = 0; c < cq; ++c) kacc[c] += de * double(qv[c]);
            for (std::size_t c = 0; c < cv; ++c) vacc[c] += a * double(dm[c]);
          }
        }
        if (!dkey.empty())
          for (std::size_t c = 0; c < cq; ++c)
            dkey[(j * locs + q) * cq + c] += static_cast<Real>(kacc[c]);
        if (!dvalue.empty())
          for (std::size_t c = 0; c < cv; ++c)
            dvalue[(j * locs + q) * cv + c] += static_cast<Real>(vacc[c]);
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
  const std::size_t cv = g.value_dim;
#pragma omp parallel
  {
    std::vector<double> logits(slots), acc(cv);
#pragma omp for schedule(static)
    for (std::size_t p = 0; p < locs; ++p)
      for (std::size_t i = 0; i < n; ++i) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < slots; ++s) {
          const auto nb = index.neighbor(p, s);
          if (nb < 0) continue;
          logits[s] = double(target_score[i * locs + p]) + double(guide_score[std::size_t(nb)]);
          peak = std::max(peak, logits[s]);
        }
        double denom = 0;
        for (std::size_t s = 0; s < slots; ++s) {
          logits[s] = index.valid(p, s) ? std::exp(logits[s] - peak) : 0.0;
          denom += logits[s];
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        Real* a = alpha.data() + (p * n + i) * slots;
        for (std::size_t s = 0; s < slots; ++s) {
          const double weight = logits[s] / denom;
          a[s] = static_cast<Real>(weight);
          const auto nb = index.neighbor(p, s);
          if (nb < 0) continue;
          const Real* v = guide_value.data() + std::size_t(nb) * cv;
          for (std::size_t c = 0; c < cv; ++c) acc[c] += weight * double(v[c]);
        }
        Real* o = out.data() + (i * locs + p) * cv;
        for (std::size_t c = 0; c < cv; ++c) o[c] = static_cast<Real>(acc[c]);
      }
  }
}

void guidance_attention_backward(const AttentionGeometry& g, const NeighborIndex& index,
                                 std::span<const Real> guide_value, std::span<const Real> alpha,
                                 std::span<const Real> dout, std::span<Real> dtarget_score,
                                 std::span<Real> dguide_score, std::span<Real> dguide_value) {
  const std::size_t locs = index.locations(), slots = index.slots(), n = g.slices;
  const std::size_t cv = g.value_dim;
  std::vector<double> dlogit(locs * n * slots, 0.0);

#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < locs; ++p)
    for (std::size_t i = 0; i < n; ++i) {
      const Real* a = alpha.data() + (p * n + i) * slots;
      const Real* dm = dout.data() + (i * locs + p) * cv;
      double* de = dlogit.data() + (p * n + i) * slots;
      double mean = 0;
      for (std::size_t s = 0; s < slots; ++s) {
        const auto nb = index.neighbor(p, s);
        if (nb < 0) continue;
        const Real* v = guide_value.data() + std::size_t(nb) * cv;
        double d = 0;
#pragma omp simd reduction(+ : d)
        for (std::size_t c = 0; c < cv; ++c) d += double(dm[c]) * double(v[c]);
        de[s] = d;
        mean += a[s] * d;
      }
      double total = 0;
      for (std::size_t s = 0; s < slots; ++s) {
        if (!index.valid(p, s)) continue;
        de[s] = a[s] * (de[s] - mean);
        total += de[s];
      }
      if (!dtarget_score.empty()) dtarget_score[i * locs + p] += static_cast<Real>(total);
    }

  if (dguide_score.empty() && dguide_value.empty()) return;
  const auto h = long(index.height()), w = long(index.width());
  const auto offsets = index.offsets();
#pragma omp parallel
  {
    std::vector<double> vacc(cv);
#pragma omp for schedule(static)
    for (std::size_t q = 0; q < locs; ++q) {
      const long qy = long(q) / w, qx = long(q) % w;
      double sacc = 0;
      std::fill(vacc.begin(), vacc.end(), 0.0);
      for (std::size_t s = 0; s < slots; ++s) {
        const long py = qy - offsets[s].dy, px = qx - offsets[s].dx;
        if (py < 0 || px < 0 || py >= h || px >= w) continue;
        const std::size_t p = std::size_t(py * w + px);
        for (std::size_t i = 0; i < n; ++i) {
          sacc += dlogit[(p * n + i) * slots + s];
          const double a = alpha[(p * n + i) * slots + s];
          const Real* dm = dout.data() + (i * locs + p) * cv;
          for (std::size_t c = 0; c < cv; ++c) vacc[c] += a * double(dm[c]);
        }
      }
      if (!dguide_score.empty()) dguide_score[q] += static_cast<Real>(sacc);
      if (!dguide_value.empty())
        for (std::size_t c = 0; c < cv; ++c) dguide_value[q * cv + c] += static_cast<Real>(vacc[c]);
    }
  }
}

}  // namespace parallel
}  // namespace kernels
DLGNET_NAMESPACE_END
