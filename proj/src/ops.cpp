#include "dlgnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dlgnet/kernels.hpp"

DLGNET_NAMESPACE_BEGIN

namespace {

using detail::Node;

Real* grad_of(Node& n, std::size_t i) {
  auto& p = n.parents[i];
  return p && p->requires_grad ? p->grad.data() : nullptr;
}

const std::vector<Real>& data_of(const Node& n, std::size_t i) { return n.parents[i]->data; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.rank() != 4)
    throw ShapeError(std::string(op) + ": expected [N,C,H,W], got " + to_string(x.shape()));
}

// outer * extent * inner decomposition around an axis.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  if (axis >= s.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(s));
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

inline Real stable_sigmoid(Real v) {
  if (v >= 0) return Real(1) / (Real(1) + std::exp(-v));
  const Real e = std::exp(v);
  return e / (Real(1) + e);
}

struct Interp {
  std::size_t lo, hi;
  Real frac;
};

std::vector<Interp> interp_table(std::size_t in, std::size_t out) {
  std::vector<Interp> t(out);
  const double ratio = double(in) / double(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (double(o) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, double(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    t[o] = {lo, hi, static_cast<Real>(src - double(lo))};
  }
  return t;
}

thread_local BranchTrace* g_branch_trace = nullptr;

}  // namespace

BranchTrace::BranchTrace() : previous_(g_branch_trace) { g_branch_trace = this; }
BranchTrace::~BranchTrace() { g_branch_trace = previous_; }
BranchTrace* BranchTrace::active() { return g_branch_trace; }

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Real> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    for (std::size_t k = 0; k < 2; ++k)
      if (Real* g = grad_of(n, k))
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<Real> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    if (Real* g = grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (Real* g = grad_of(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<Real> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    const auto& x = data_of(n, 0);
    const auto& y = data_of(n, 1);
    if (Real* g = grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * y[i];
    if (Real* g = grad_of(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * x[i];
  });
}

Tensor scale(const Tensor& a, Real factor) {
  std::vector<Real> out(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [factor](Node& n) {
    if (Real* g = grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * factor;
  });
}

Tensor one_minus(const Tensor& a) {
  std::vector<Real> out(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Real(1) - x[i];
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](Node& n) {
    if (Real* g = grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<Real> out(x.size());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > Real(0) ? v[i] : Real(0);
  if (BranchTrace* t = BranchTrace::active())
    for (std::size_t i = 0; i < out.size(); ++i) t->note(v[i] > Real(0));
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& n) {
    if (Real* g = grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        if (n.data[i] > Real(0)) g[i] += n.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<Real> out(x.size());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(v[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& n) {
    if (Real* g = grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        g[i] += n.grad[i] * n.data[i] * (Real(1) - n.data[i]);
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<Real> out(x.size());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(v[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& n) {
    if (Real* g = grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        g[i] += n.grad[i] * (Real(1) - n.data[i] * n.data[i]);
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  const auto g = kernels::conv_geometry(x.shape(), weight.shape(), stride, pad);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.out_channels))
    throw ShapeError("conv2d bias must be [" + std::to_string(g.out_channels) + "], got " +
                     to_string(bias.shape()));
  std::vector<Real> out(g.batch * g.out_channels * g.out_h * g.out_w);
  kernels::parallel::conv2d_forward(g, x.data(), weight.data(),
                                    bias.defined() ? bias.data() : std::span<const Real>{}, out);
  Shape shape{g.batch, g.out_channels, g.out_h, g.out_w};
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::make_result(std::move(shape), std::move(out), inputs, [g](Node& n) {
    auto span_or_empty = [&](std::size_t i) {
      Real* p = i < n.parents.size() ? grad_of(n, i) : nullptr;
      return p ? std::span<Real>(p, n.parents[i]->grad.size()) : std::span<Real>{};
    };
    kernels::parallel::conv2d_backward(g, data_of(n, 0), data_of(n, 1), n.grad, span_or_empty(0),
                                       span_or_empty(1), span_or_empty(2));
  });
}

Tensor max_pool2x2(const Tensor& x) {
  require_rank4(x, "max_pool2x2");
  const std::size_t nb = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2)
    throw ShapeError("max_pool2x2 needs even spatial extents, got " + to_string(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<Real> out(nb * c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  auto v = x.data();
  for (std::size_t plane = 0; plane < nb * c; ++plane)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) {
        std::size_t best = plane * h * w + (2 * y) * w + 2 * xo;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = plane * h * w + (2 * y + dy) * w + 2 * xo + dx;
            if (v[idx] > v[best]) best = idx;
          }
        const std::size_t o = plane * oh * ow + y * ow + xo;
        out[o] = v[best];
        argmax[o] = best;
      }
  if (BranchTrace* t = BranchTrace::active())
    for (std::size_t a : argmax) t->note(a);
  return Tensor::make_result({nb, c, oh, ow}, std::move(out), {x},
                             [argmax = std::move(argmax)](Node& n) {
                               if (Real* g = grad_of(n, 0))
                                 for (std::size_t i = 0; i < n.grad.size(); ++i)
                                   g[argmax[i]] += n.grad[i];
                             });
}

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank4(x, "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw ShapeError("bilinear_resize: target extent must be >= 1");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (out_h == h && out_w == w) {
    // Exact identity; still routed through the graph.
    return Tensor::make_result(x.shape(), x.to_vector(), {x}, [](Node& n) {
      if (Real* g = grad_of(n, 0))
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    });
  }
  const auto ty = interp_table(h, out_h), tx = interp_table(w, out_w);
  std::vector<Real> out(planes * out_h * out_w);
  auto v = x.data();
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < planes; ++p) {
    const Real* src = v.data() + p * h * w;
    Real* dst = out.data() + p * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const auto& a = ty[y];
      for (std::size_t xo = 0; xo < out_w; ++xo) {
        const auto& b = tx[xo];
        const Real top = src[a.lo * w + b.lo] + b.frac * (src[a.lo * w + b.hi] - src[a.lo * w + b.lo]);
        const Real bot = src[a.hi * w + b.lo] + b.frac * (src[a.hi * w + b.hi] - src[a.hi * w + b.lo]);
        dst[y * out_w + xo] = top + a.frac * (bot - top);
      }
    }
  }
  Shape shape{x.dim(0), x.dim(1), out_h, out_w};
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [ty, tx, planes, h, w, out_h, out_w](Node& n) {
                               Real* g = grad_of(n, 0);
                               if (!g) return;
#pragma omp parallel for schedule(static)
                               for (std::size_t p = 0; p < planes; ++p) {
                                 Real* dst = g + p * h * w;
                                 const Real* src = n.grad.data() + p * out_h * out_w;
                                 for (std::size_t y = 0; y < out_h; ++y) {
                                   const auto& a = ty[y];
                                   for (std::size_t xo = 0; xo < out_w; ++xo) {
                                     const auto& b = tx[xo];
                                     const Real d = src[y * out_w + xo];
                                     const Real top = d * (Real(1) - a.frac), bot = d * a.frac;
                                     dst[a.lo * w + b.lo] += top * (Real(1) - b.frac);
                                     dst[a.lo * w + b.hi] += top * b.frac;
                                     dst[a.hi * w + b.lo] += bot * (Real(1) - b.frac);
                                     dst[a.hi * w + b.hi] += bot * b.frac;
                                   }
                                 }
                               }
                             });
}

Tensor nearest_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank4(x, "nearest_resize");
  if (out_h == 0 || out_w == 0) throw ShapeError("nearest_resize: target extent must be >= 1");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  auto pick = [](std::size_t o, std::size_t in, std::size_t out) {
    const double src = (double(o) + 0.5) * double(in) / double(out);
    return std::min(static_cast<std::size_t>(std::floor(src)), in - 1);
  };
  std::vector<Real> out(planes * out_h * out_w);
  auto v = x.data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t xo = 0; xo < out_w; ++xo)
        out[(p * out_h + y) * out_w + xo] = v[(p * h + pick(y, h, out_h)) * w + pick(xo, w, out_w)];
  return Tensor({x.dim(0), x.dim(1), out_h, out_w}, std::move(out));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Shape shape = parts[0].shape();
  if (axis >= shape.size()) throw ShapeError("concat axis out of range");
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) throw ShapeError("concat rank mismatch");
    total += s[axis];
    s[axis] = shape[axis];
    if (s != shape)
      throw ShapeError("concat shape mismatch: " + to_string(p.shape()) + " vs " +
                       to_string(parts[0].shape()));
  }
  shape[axis] = total;
  const auto split = split_at(shape, axis);
  std::vector<Real> out(numel(shape));
  std::vector<std::size_t> extents;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t e = p.dim(axis);
    auto v = p.data();
    for (std::size_t o = 0; o < split.outer; ++o)
      std::copy_n(v.begin() + o * e * split.inner, e * split.inner,
                  out.begin() + (o * total + offset) * split.inner);
    extents.push_back(e);
    offset += e;
  }
  return Tensor::make_result(shape, std::move(out), parts,
                             [split, total, extents = std::move(extents)](Node& n) {
                               std::size_t offset = 0;
                               for (std::size_t k = 0; k < extents.size(); ++k) {
                                 const std::size_t e = extents[k];
                                 if (Real* g = grad_of(n, k))
                                   for (std::size_t o = 0; o < split.outer; ++o)
                                     for (std::size_t i = 0; i < e * split.inner; ++i)
                                       g[o * e * split.inner + i] +=
                                           n.grad[(o * total + offset) * split.inner + i];
                                 offset += e;
                               }
                             });
}

Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto split = split_at(x.shape(), axis);
  if (length == 0 || start + length > split.extent)
    throw ShapeError("narrow range [" + std::to_string(start) + "," +
                     std::to_string(start + length) + ") outside axis of extent " +
                     std::to_string(split.extent));
  Shape shape = x.shape();
  shape[axis] = length;
  std::vector<Real> out(numel(shape));
  auto v = x.data();
  for (std::size_t o = 0; o < split.outer; ++o)
    std::copy_n(v.begin() + (o * split.extent + start) * split.inner, length * split.inner,
                out.begin() + o * length * split.inner);
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [split, start, length](Node& n) {
                               if (Real* g = grad_of(n, 0))
                                 for (std::size_t o = 0; o < split.outer; ++o)
                                   for (std::size_t i = 0; i < length * split.inner; ++i)
                                     g[(o * split.extent + start) * split.inner + i] +=
                                         n.grad[o * length * split.inner + i];
                             });
}

Tensor index_select(const Tensor& x, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ShapeError("index_select with no indices");
  const std::size_t rows = x.dim(0), row = x.size() / rows;
  for (auto i : indices)
    if (i >= rows) throw ShapeError("index_select index out of range");
  Shape shape = x.shape();
  shape[0] = indices.size();
  std::vector<Real> out(indices.size() * row);
  auto v = x.data();
  for (std::size_t k = 0; k < indices.size(); ++k)
    std::copy_n(v.begin() + indices[k] * row, row, out.begin() + k * row);
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [indices, row](Node& n) {
                               if (Real* g = grad_of(n, 0))
                                 for (std::size_t k = 0; k < indices.size(); ++k)
                                   for (std::size_t i = 0; i < row; ++i)
                                     g[indices[k] * row + i] += n.grad[k * row + i];
                             });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape " + to_string(x.shape()) + " -> " + to_string(shape));
  return Tensor::make_result(std::move(shape), x.to_vector(), {x}, [](Node& n) {
    if (Real* g = grad_of(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  if (s.extent == 0) throw ShapeError("softmax over an empty axis");
  std::vector<Real> out(x.size());
  auto v = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.extent; ++k) peak = std::max(peak, double(v[base + k * s.inner]));
      double denom = 0;
      for (std::size_t k = 0; k < s.extent; ++k) denom += std::exp(double(v[base + k * s.inner]) - peak);
      for (std::size_t k = 0; k < s.extent; ++k)
        out[base + k * s.inner] = static_cast<Real>(std::exp(double(v[base + k * s.inner]) - peak) / denom);
    }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [s](Node& n) {
    Real* g = grad_of(n, 0);
    if (!g) return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        double dot = 0;
        for (std::size_t k = 0; k < s.extent; ++k)
          dot += double(n.data[base + k * s.inner]) * n.grad[base + k * s.inner];
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t i = base + k * s.inner;
          g[i] += static_cast<Real>(n.data[i] * (n.grad[i] - dot));
        }
      }
  });
}

Tensor mul_channel_broadcast(const Tensor& x, const Tensor& a) {
  require_rank4(x, "mul_channel_broadcast");
  require_rank4(a, "mul_channel_broadcast");
  if (a.dim(0) != x.dim(0) || a.dim(1) != 1 || a.dim(2) != x.dim(2) || a.dim(3) != x.dim(3))
    throw ShapeError("mul_channel_broadcast: " + to_string(x.shape()) + " vs " + to_string(a.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<Real> out(x.size());
  auto xv = x.data(), av = a.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < plane; ++p)
        out[(i * c + ch) * plane + p] = xv[(i * c + ch) * plane + p] * av[i * plane + p];
  return Tensor::make_result(x.shape(), std::move(out), {x, a}, [n, c, plane](Node& node) {
    const auto& xv = data_of(node, 0);
    const auto& av = data_of(node, 1);
    Real* gx = grad_of(node, 0);
    Real* ga = grad_of(node, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t idx = (i * c + ch) * plane + p;
          if (gx) gx[idx] += node.grad[idx] * av[i * plane + p];
          if (ga) ga[i * plane + p] += node.grad[idx] * xv[idx];
        }
  });
}

Tensor sum_axis0(const Tensor& x) {
  const std::size_t rows = x.dim(0), row = x.size() / rows;
  Shape shape = x.shape();
  shape[0] = 1;
  std::vector<double> acc(row, 0.0);
  auto v = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < row; ++i) acc[i] += v[r * row + i];
  std::vector<Real> out(acc.begin(), acc.end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [rows, row](Node& n) {
    if (Real* g = grad_of(n, 0))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < row; ++i) g[r * row + i] += n.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0;
  for (Real v : x.data()) acc += v;
  return Tensor::make_result({1}, {static_cast<Real>(acc)}, {x}, [](Node& n) {
    if (Real* g = grad_of(n, 0))
      for (std::size_t i = 0; i < n.parents[0]->data.size(); ++i) g[i] += n.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), Real(1) / static_cast<Real>(x.size())); }

double bce_value(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "bce_loss");
  auto p = prediction.data(), t = target.data();
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i], ti = t[i];
    acc -= ti * std::log(std::max(pi, kBceClamp)) + (1.0 - ti) * std::log(std::max(1.0 - pi, kBceClamp));
  }
  if (BranchTrace* t = BranchTrace::active())
    for (std::size_t i = 0; i < p.size(); ++i)
      t->note((double(p[i]) > kBceClamp) | (1.0 - double(p[i]) > kBceClamp) << 1);
  return acc / double(p.size());
}

Tensor bce_loss(const Tensor& prediction, const Tensor& target) {
  const double value = bce_value(prediction, target);
  const double count = double(prediction.size());
  return Tensor::make_result({1}, {static_cast<Real>(value)}, {prediction, target},
                             [count](Node& n) {
                               Real* g = grad_of(n, 0);
                               if (!g) return;
                               const auto& p = data_of(n, 0);
                               const auto& t = data_of(n, 1);
                               const double scale = n.grad[0] / count;
                               for (std::size_t i = 0; i < p.size(); ++i) {
                                 const double pi = p[i], ti = t[i];
                                 double d = 0;
                                 if (pi > kBceClamp) d -= ti / pi;
                                 if (1.0 - pi > kBceClamp) d += (1.0 - ti) / (1.0 - pi);
                                 g[i] += static_cast<Real>(d * scale);
                               }
                             });
}

DLGNET_NAMESPACE_END
