#include "dlgnet/graph.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "dlgnet/kernels.hpp"
#include "dlgnet/ops.hpp"

DLGNET_NAMESPACE_BEGIN

namespace {

using detail::Node;

// [N][C][L] <-> [N][L][C]
std::vector<Real> to_channel_last(std::span<const Real> v, std::size_t n, std::size_t c,
                                  std::size_t locs) {
  std::vector<Real> out(v.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < locs; ++p) out[(i * locs + p) * c + ch] = v[(i * c + ch) * locs + p];
  return out;
}

void add_channel_first(std::span<const Real> cl, std::size_t n, std::size_t c, std::size_t locs,
                       Real* dst) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < locs; ++p) dst[(i * c + ch) * locs + p] += cl[(i * locs + p) * c + ch];
}

std::vector<Real> to_channel_first(std::span<const Real> cl, std::size_t n, std::size_t c,
                                   std::size_t locs) {
  std::vector<Real> out(cl.size(), Real(0));
  add_channel_first(cl, n, c, locs, out.data());
  return out;
}

bool wants_grad(const Node& n, std::size_t i) {
  return n.parents[i] && n.parents[i]->requires_grad;
}

void check_map(const Tensor& t, const NeighborIndex& index, const char* what) {
  if (t.rank() != 4 || t.dim(2) != index.height() || t.dim(3) != index.width())
    throw ShapeError(std::string(what) + ": expected [*,*," + std::to_string(index.height()) + "," +
                     std::to_string(index.width()) + "], got " + to_string(t.shape()));
}

}  // namespace

DlgParams make_dlg_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                          std::size_t edge_channels, SeededRng& rng, bool zero_out) {
  if (channels == 0 || edge_channels == 0)
    throw std::invalid_argument("DLG channel widths must be positive");
  DlgParams p;
  p.channels = channels;
  p.edge_channels = edge_channels;
  p.query_f = make_conv(store, prefix + ".query_f", edge_channels, channels, 1, rng);
  p.key_f = make_conv(store, prefix + ".key_f", edge_channels, channels, 1, rng);
  p.value_f = make_conv(store, prefix + ".value_f", channels, channels, 1, rng);
  p.out_f = make_conv(store, prefix + ".out_f", channels, channels, 1, rng);
  p.query_a = make_conv(store, prefix + ".query_a", edge_channels, channels, 1, rng);
  p.key_a = make_conv(store, prefix + ".key_a", edge_channels, channels, 1, rng);
  p.value_a = make_conv(store, prefix + ".value_a", channels, channels, 1, rng);
  p.out_a = make_conv(store, prefix + ".out_a", channels, channels, 1, rng);
  p.score_weight = store.add_uniform(prefix + ".score_a.weight", {1, 2 * edge_channels, 1, 1},
                                     store.weight_bound(2 * edge_channels), rng);
  p.score_bias = store.add(prefix + ".score_a.bias", {1});
  if (zero_out) {
    for (Conv* c : {&p.out_f, &p.out_a}) {
      for (auto& v : c->weight.data()) v = 0;
      for (auto& v : c->bias.data()) v = 0;
    }
  }
  return p;
}

Tensor focal_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                       const NeighborIndex& index, std::vector<Real>* alpha) {
  check_map(query, index, "focal_attention query");
  check_map(value, index, "focal_attention value");
  if (key.shape() != query.shape() || value.dim(0) != query.dim(0))
    throw ShapeError("focal_attention: query " + to_string(query.shape()) + ", key " +
                     to_string(key.shape()) + ", value " + to_string(value.shape()));
  const std::size_t n = query.dim(0), locs = index.locations();
  const kernels::AttentionGeometry g{n, query.dim(1), value.dim(1)};
  auto q = to_channel_last(query.data(), n, g.key_dim, locs);
  auto k = to_channel_last(key.data(), n, g.key_dim, locs);
  auto v = to_channel_last(value.data(), n, g.value_dim, locs);
  std::vector<Real> out(n * locs * g.value_dim);
  std::vector<Real> a(locs * n * index.slots() * n);
  kernels::parallel::focal_attention_forward(g, index, q, k, v, out, a);
  if (alpha) *alpha = a;
  auto idx = std::make_shared<const NeighborIndex>(index);
  return Tensor::make_result(
      value.shape(), to_channel_first(out, n, g.value_dim, locs), {query, key, value},
      [g, idx, q = std::move(q), k = std::move(k), v = std::move(v), a = std::move(a)](Node& node) {
        const std::size_t n = g.slices, locs = idx->locations();
        auto dout = to_channel_last(node.grad, n, g.value_dim, locs);
        std::vector<Real> dq, dk, dv;
        if (wants_grad(node, 0)) dq.assign(q.size(), 0);
        if (wants_grad(node, 1)) dk.assign(k.size(), 0);
        if (wants_grad(node, 2)) dv.assign(v.size(), 0);
        kernels::parallel::focal_attention_backward(g, *idx, q, k, v, a, dout, dq, dk, dv);
        if (!dq.empty()) add_channel_first(dq, n, g.key_dim, locs, node.parents[0]->grad.data());
        if (!dk.empty()) add_channel_first(dk, n, g.key_dim, locs, node.parents[1]->grad.data());
        if (!dv.empty()) add_channel_first(dv, n, g.value_dim, locs, node.parents[2]->grad.data());
      });
}

Tensor guidance_attention(const Tensor& target_score, const Tensor& guide_score,
                          const Tensor& guide_value, const NeighborIndex& index,
                          std::vector<Real>* alpha) {
  check_map(target_score, index, "guidance_attention target_score");
  check_map(guide_score, index, "guidance_attention guide_score");
  check_map(guide_value, index, "guidance_attention guide_value");
  if (target_score.dim(1) != 1 || guide_score.dim(0) != 1 || guide_score.dim(1) != 1 ||
      guide_value.dim(0) != 1)
    throw ShapeError("guidance_attention: target_score " + to_string(target_score.shape()) +
                     ", guide_score " + to_string(guide_score.shape()) + ", guide_value " +
                     to_string(guide_value.shape()));
  const std::size_t n = target_score.dim(0), locs = index.locations(), c = guide_value.dim(1);
  const kernels::AttentionGeometry g{n, 1, c};
  auto gv = to_channel_last(guide_value.data(), 1, c, locs);
  std::vector<Real> out(n * locs * c);
  std::vector<Real> a(locs * n * index.slots());
  kernels::parallel::guidance_attention_forward(g, index, target_score.data(), guide_score.data(),
                                                gv, out, a);
  if (alpha) *alpha = a;
  auto idx = std::make_shared<const NeighborIndex>(index);
  return Tensor::make_result(
      {n, c, index.height(), index.width()}, to_channel_first(out, n, c, locs),
      {target_score, guide_score, guide_value},
      [g, idx, gv = std::move(gv), a = std::move(a)](Node& node) {
        const std::size_t locs = idx->locations();
        auto dout = to_channel_last(node.grad, g.slices, g.value_dim, locs);
        std::span<Real> dts, dgs;
        if (wants_grad(node, 0)) dts = node.parents[0]->grad;
        if (wants_grad(node, 1)) dgs = node.parents[1]->grad;
        std::vector<Real> dgv;
        if (wants_grad(node, 2)) dgv.assign(gv.size(), 0);
        kernels::parallel::guidance_attention_backward(g, *idx, gv, a, dout, dts, dgs, dgv);
        if (!dgv.empty()) add_channel_first(dgv, 1, g.value_dim, locs, node.parents[2]->grad.data());
      });
}

Tensor dlg_forward(const Tensor& focal, const Tensor& allfocus, const DlgParams& params,
                   const NeighborIndex& index, const DlgOptions& options, DlgTrace* trace) {
  if (focal.rank() != 4 || allfocus.rank() != 4 || allfocus.dim(0) != 1 ||
      focal.dim(1) != params.channels || allfocus.dim(1) != params.channels ||
      focal.dim(2) != allfocus.dim(2) || focal.dim(3) != allfocus.dim(3))
    throw ShapeError("dlg_forward: F_f " + to_string(focal.shape()) + " and F_a " +
                     to_string(allfocus.shape()) + " must be [N,C,H,W] and [1,C,H,W] with C=" +
                     std::to_string(params.channels) + " and equal H,W");
  check_map(focal, index, "dlg_forward");
  if (trace) {
    *trace = {};
    trace->slices = focal.dim(0);
    trace->slots = index.slots();
    trace->locations = index.locations();
  }
  Tensor delta;
  if (options.use_ff) {
    const Tensor m = focal_attention(params.query_f(focal), params.key_f(focal),
                                     params.value_f(focal), index,
                                     trace ? &trace->alpha_f : nullptr);
    delta = params.out_f(m);
  }
  if (options.use_fa) {
    const std::size_t cp = params.edge_channels;
    const Tensor target = conv2d(params.query_a(focal), narrow(params.score_weight, 1, 0, cp),
                                 params.score_bias);
    const Tensor guide = conv2d(params.key_a(allfocus), narrow(params.score_weight, 1, cp, cp), {});
    const Tensor m = guidance_attention(target, guide, params.value_a(allfocus), index,
                                        trace ? &trace->alpha_a : nullptr);
    const Tensor pa = params.out_a(m);
    delta = delta.defined() ? add(delta, pa) : pa;
  }
  return delta.defined() ? add(delta, focal) : focal;
}

NeighborSets neighbor_sets(int y, int x, std::size_t slices, const WindowSpec& spec,
                           std::size_t height, std::size_t width) {
  NeighborSets s;
  for (std::size_t i = 0; i < slices; ++i) s.targets.push_back({int(i), y, x});
  s.guides.push_back({-1, y, x});
  for (const Offset& o : union_offsets(spec)) {
    const int ny = y + o.dy, nx = x + o.dx;
    if (ny < 0 || nx < 0 || ny >= int(height) || nx >= int(width)) continue;
    for (std::size_t j = 0; j < slices; ++j) s.surround.push_back({int(j), ny, nx});
    s.guides.push_back({-1, ny, nx});
  }
  return s;
}

std::vector<double> apply_linear(const Conv& map, std::span<const double> h) {
  const std::size_t out = map.weight.dim(0), in = map.weight.dim(1);
  if (h.size() != in || map.weight.dim(2) != 1 || map.weight.dim(3) != 1)
    throw ShapeError("apply_linear: weight " + to_string(map.weight.shape()) + " vs input of " +
                     std::to_string(h.size()));
  auto w = map.weight.data();
  std::vector<double> r(out, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    double acc = map.bias.defined() ? double(map.bias.data()[o]) : 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += double(w[o * in + i]) * h[i];
    r[o] = acc;
  }
  return r;
}

double edge_ff(std::span<const double> h_u, std::span<const double> h_v, const DlgParams& params) {
  const auto a = apply_linear(params.query_f, h_u);
  const auto b = apply_linear(params.key_f, h_v);
  double e = 0;
  for (std::size_t c = 0; c < a.size(); ++c) e += a[c] * b[c];
  return e;
}

double edge_fa(std::span<const double> h_u, std::span<const double> h_q, const DlgParams& params) {
  const auto a = apply_linear(params.query_a, h_u);
  const auto b = apply_linear(params.key_a, h_q);
  auto w = params.score_weight.data();
  double e = params.score_bias.data()[0];
  for (std::size_t c = 0; c < a.size(); ++c) e += double(w[c]) * a[c];
  for (std::size_t c = 0; c < b.size(); ++c) e += double(w[a.size() + c]) * b[c];
  return e;
}

NodeFeatures::NodeFeatures(const Tensor& focal, const Tensor& allfocus)
    : focal_(focal.to_vector()),
      allfocus_(allfocus.to_vector()),
      channels_(focal.dim(1)),
      height_(focal.dim(2)),
      width_(focal.dim(3)) {}

std::vector<double> NodeFeatures::operator()(const NodeId& id) const {
  const std::size_t plane = height_ * width_;
  const std::size_t p = std::size_t(id.y) * width_ + std::size_t(id.x);
  const auto& src = id.slice < 0 ? allfocus_ : focal_;
  const std::size_t base = id.slice < 0 ? 0 : std::size_t(id.slice) * channels_ * plane;
  std::vector<double> h(channels_);
  for (std::size_t c = 0; c < channels_; ++c) h[c] = src[base + c * plane + p];
  return h;
}

namespace {

template <class EdgeFn>
std::vector<double> attend(const std::vector<NodeId>& support, const NodeFeatures& h,
                           const Conv& value, EdgeFn edge) {
  std::vector<double> logits;
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& v : support) {
    logits.push_back(edge(h(v)));
    peak = std::max(peak, logits.back());
  }
  double denom = 0;
  for (double l : logits) denom += std::exp(l - peak);
  std::vector<double> m(value.weight.dim(0), 0.0);
  for (std::size_t s = 0; s < support.size(); ++s) {
    const double a = std::exp(logits[s] - peak) / denom;
    const auto gv = apply_linear(value, h(support[s]));
    for (std::size_t c = 0; c < m.size(); ++c) m[c] += a * gv[c];
  }
  return m;
}

}  // namespace

Messages attention_messages(const NodeId& u, const NeighborSets& sets, const NodeFeatures& h,
                            const DlgParams& params) {
  const auto hu = h(u);
  std::vector<NodeId> focal_support = sets.targets;
  focal_support.insert(focal_support.end(), sets.surround.begin(), sets.surround.end());
  Messages m;
  m.focal = attend(focal_support, h, params.value_f,
                   [&](const std::vector<double>& hv) { return edge_ff(hu, hv, params); });
  m.guide = attend(sets.guides, h, params.value_a,
                   [&](const std::vector<double>& hq) { return edge_fa(hu, hq, params); });
  return m;
}

std::vector<double> node_update(std::span<const double> h_u, const Messages& m,
                                const DlgParams& params, const DlgOptions& options) {
  std::vector<double> out(h_u.begin(), h_u.end());
  if (options.use_ff) {
    const auto pf = apply_linear(params.out_f, m.focal);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += pf[c];
  }
  if (options.use_fa) {
    const auto pa = apply_linear(params.out_a, m.guide);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += pa[c];
  }
  return out;
}

Tensor dlg_reference_loop(const Tensor& focal, const Tensor& allfocus, const DlgParams& params,
                          const WindowSpec& spec, const DlgOptions& options) {
  const std::size_t n = focal.dim(0), c = focal.dim(1), h = focal.dim(2), w = focal.dim(3);
  const NodeFeatures features(focal, allfocus);
  std::vector<Real> out(focal.size());
  for (int y = 0; y < int(h); ++y)
    for (int x = 0; x < int(w); ++x) {
      const auto sets = neighbor_sets(y, x, n, spec, h, w);
      for (const NodeId& u : sets.targets) {
        const auto hu = features(u);
        const auto updated = node_update(hu, attention_messages(u, sets, features, params), params, options);
        for (std::size_t ch = 0; ch < c; ++ch)
          out[((std::size_t(u.slice) * c + ch) * h + std::size_t(y)) * w + std::size_t(x)] =
              static_cast<Real>(updated[ch]);
      }
    }
  return Tensor(focal.shape(), std::move(out));
}

DLGNET_NAMESPACE_END
