#include "dlgnet/dense_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <utility>

DLGNET_NAMESPACE_BEGIN

namespace {

std::vector<std::pair<int, int>> window_offsets(const WindowSpec& spec) {
  spec.validate();
  std::set<std::pair<int, int>> seen;
  std::vector<std::pair<int, int>> out;
  const int r = (spec.k - 1) / 2;
  for (int d : spec.dilations)
    for (int i = -r; i <= r; ++i)
      for (int j = -r; j <= r; ++j)
        if ((i || j) && seen.insert({i * d, j * d}).second) out.push_back({i * d, j * d});
  return out;
}

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> w;
  std::vector<double> b;
};

Matrix matrix_of(const Conv& c) {
  Matrix m;
  m.rows = c.weight.dim(0);
  m.cols = c.weight.dim(1);
  for (Real v : c.weight.data()) m.w.push_back(v);
  m.b.assign(m.rows, 0.0);
  if (c.bias.defined())
    for (std::size_t o = 0; o < m.rows; ++o) m.b[o] = c.bias.data()[o];
  return m;
}

std::vector<double> times(const Matrix& m, const std::vector<double>& x) {
  std::vector<double> y(m.b);
  for (std::size_t o = 0; o < m.rows; ++o)
    for (std::size_t i = 0; i < m.cols; ++i) y[o] += m.w[o * m.cols + i] * x[i];
  return y;
}

}  // namespace

std::uint64_t DenseGraph::count(EdgeKind kind) const {
  return std::uint64_t(std::count_if(edges.begin(), edges.end(),
                                     [kind](const DenseEdge& e) { return e.kind == kind; }));
}

DenseGraph build_dense_graph(std::size_t slices, std::size_t height, std::size_t width,
                             const WindowSpec& spec) {
  const std::size_t hw = height * width;
  if ((slices + 1) * hw > kDenseOracleLimit)
    throw std::length_error("dense oracle refuses (N+1)*H*W = " + std::to_string((slices + 1) * hw) +
                            " > " + std::to_string(kDenseOracleLimit));
  DenseGraph g;
  g.slices = slices;
  g.height = height;
  g.width = width;
  for (std::size_t s = 0; s <= slices; ++s)
    for (std::size_t p = 0; p < hw; ++p)
      g.nodes.push_back({s == slices ? -1 : int(s), int(p / width), int(p % width)});
  auto offsets = window_offsets(spec);
  offsets.insert(offsets.begin(), {0, 0});
  const auto af = std::uint32_t(slices * hw);
  for (std::size_t i = 0; i < slices; ++i)
    for (std::size_t p = 0; p < hw; ++p) {
      const auto dst = std::uint32_t(i * hw + p);
      const int y = int(p / width), x = int(p % width);
      for (auto [dy, dx] : offsets) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || nx < 0 || ny >= int(height) || nx >= int(width)) {
          g.masked_edges += slices + 1;
          continue;
        }
        const std::size_t q = std::size_t(ny) * width + std::size_t(nx);
        for (std::size_t j = 0; j < slices; ++j)
          g.edges.push_back({std::uint32_t(j * hw + q), dst, EdgeKind::focal_focal});
        g.edges.push_back({std::uint32_t(af + q), dst, EdgeKind::focal_all});
      }
    }
  return g;
}

Tensor dense_oracle(const Tensor& focal, const Tensor& allfocus, const DlgParams& params,
                    const WindowSpec& spec, const DlgOptions& options) {
  if (focal.rank() != 4 || allfocus.rank() != 4 || allfocus.dim(0) != 1 ||
      focal.dim(1) != allfocus.dim(1) || focal.dim(2) != allfocus.dim(2) ||
      focal.dim(3) != allfocus.dim(3))
    throw ShapeError("dense_oracle: F_f " + to_string(focal.shape()) + " vs F_a " +
                     to_string(allfocus.shape()));
  const std::size_t n = focal.dim(0), c = focal.dim(1), h = focal.dim(2), w = focal.dim(3);
  const std::size_t hw = h * w;
  const DenseGraph graph = build_dense_graph(n, h, w, spec);

  // Node embeddings.
  const auto fv = focal.data(), av = allfocus.data();
  std::vector<std::vector<double>> emb(graph.nodes.size(), std::vector<double>(c));
  for (std::size_t id = 0; id < graph.nodes.size(); ++id) {
    const std::size_t s = id / hw, p = id % hw;
    for (std::size_t ch = 0; ch < c; ++ch)
      emb[id][ch] = s < n ? double(fv[(s * c + ch) * hw + p]) : double(av[ch * hw + p]);
  }
  const Matrix theta_f = matrix_of(params.query_f), phi_f = matrix_of(params.key_f);
  const Matrix g_f = matrix_of(params.value_f), out_f = matrix_of(params.out_f);
  const Matrix theta_a = matrix_of(params.query_a), phi_a = matrix_of(params.key_a);
  const Matrix g_a = matrix_of(params.value_a), out_a = matrix_of(params.out_a);
  const std::size_t cp = params.edge_channels;
  std::vector<double> psi(params.score_weight.data().begin(), params.score_weight.data().end());
  const double psi_bias = params.score_bias.data()[0];

  // Edge logits.
  std::vector<double> logit(graph.edges.size());
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    const auto& hu = emb[edge.dst];
    const auto& hv = emb[edge.src];
    double value = 0;
    if (edge.kind == EdgeKind::focal_focal) {
      const auto a = times(theta_f, hu), b = times(phi_f, hv);
      for (std::size_t k = 0; k < cp; ++k) value += a[k] * b[k];
    } else {
      const auto a = times(theta_a, hu), b = times(phi_a, hv);
      value = psi_bias;
      for (std::size_t k = 0; k < cp; ++k) value += psi[k] * a[k] + psi[cp + k] * b[k];
    }
    logit[e] = value;
  }

  // Softmax per (target, kind), then weighted sums of transformed sources.
  const std::size_t targets = n * hw;
  std::vector<double> peak(2 * targets, -std::numeric_limits<double>::infinity());
  std::vector<double> denom(2 * targets, 0.0);
  auto slot = [&](const DenseEdge& e) { return 2 * std::size_t(e.dst) + (e.kind == EdgeKind::focal_all); };
  for (std::size_t e = 0; e < graph.edges.size(); ++e)
    peak[slot(graph.edges[e])] = std::max(peak[slot(graph.edges[e])], logit[e]);
  for (std::size_t e = 0; e < graph.edges.size(); ++e)
    denom[slot(graph.edges[e])] += std::exp(logit[e] - peak[slot(graph.edges[e])]);
  std::vector<std::vector<double>> msg(2 * targets, std::vector<double>(c, 0.0));
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    const std::size_t s = slot(edge);
    const double alpha = std::exp(logit[e] - peak[s]) / denom[s];
    const auto v = times(edge.kind == EdgeKind::focal_focal ? g_f : g_a, emb[edge.src]);
    for (std::size_t ch = 0; ch < c; ++ch) msg[s][ch] += alpha * v[ch];
  }

  std::vector<Real> out(focal.size());
  for (std::size_t t = 0; t < targets; ++t) {
    std::vector<double> upd = emb[t];
    if (options.use_ff) {
      const auto pf = times(out_f, msg[2 * t]);
      for (std::size_t ch = 0; ch < c; ++ch) upd[ch] += pf[ch];
    }
    if (options.use_fa) {
      const auto pa = times(out_a, msg[2 * t + 1]);
      for (std::size_t ch = 0; ch < c; ++ch) upd[ch] += pa[ch];
    }
    const std::size_t i = t / hw, p = t % hw;
    for (std::size_t ch = 0; ch < c; ++ch) out[(i * c + ch) * hw + p] = static_cast<Real>(upd[ch]);
  }
  return Tensor(focal.shape(), std::move(out));
}

DLGNET_NAMESPACE_END
