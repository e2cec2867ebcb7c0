#include "dlgnet/recip.hpp"

#include <stdexcept>

#include "dlgnet/ops.hpp"

DLGNET_NAMESPACE_BEGIN

Tensor fsfa(const Tensor& focal, const Conv& reduce, Tensor* attention) {
  if (focal.rank() != 4 || focal.dim(0) == 0)
    throw ShapeError("fsfa expects [N,C,H,W] with N >= 1, got " + to_string(focal.shape()));
  const Tensor a = softmax(reduce(focal), 0);
  if (attention) *attention = a;
  return sum_axis0(mul_channel_broadcast(focal, a));
}

GruParams make_gru_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                          std::size_t kernel, SeededRng& rng) {
  return {make_conv(store, prefix + ".update", channels, 2 * channels, kernel, rng),
          make_conv(store, prefix + ".reset", channels, 2 * channels, kernel, rng),
          make_conv(store, prefix + ".candidate", channels, 2 * channels, kernel, rng)};
}

Tensor conv_gru(const Tensor& x, const Tensor& h, const GruParams& gru) {
  if (x.shape() != h.shape())
    throw ShapeError("conv_gru: input " + to_string(x.shape()) + " vs state " + to_string(h.shape()));
  const Tensor xh = concat({x, h}, 1);
  const Tensor z = sigmoid(gru.update(xh));
  const Tensor r = sigmoid(gru.reset(xh));
  const Tensor cand = tanh(gru.candidate(concat({x, mul(r, h)}, 1)));
  return add(mul(one_minus(z), h), mul(z, cand));
}

RecipParams make_recip_params(ParameterStore& store, std::size_t channels,
                              std::size_t edge_channels, std::size_t gru_kernel, SeededRng& rng,
                              bool zero_out) {
  RecipParams p;
  p.dlg = make_dlg_params(store, "dlg", channels, edge_channels, rng, zero_out);
  p.reduce = make_conv(store, "fsfa.reduce", 1, channels, 1, rng);
  p.gru = make_gru_params(store, "gru", channels, gru_kernel, rng);
  p.side = make_conv(store, "side.head", 1, channels, 1, rng);
  return p;
}

Tensor side_map(const Tensor& allfocus, const Conv& side) { return sigmoid(side(allfocus)); }

StepResult reciprocative_step(const Tensor& focal, const Tensor& allfocus, const RecipParams& params,
                              const NeighborIndex& index, const DlgOptions& options) {
  StepResult r;
  r.focal = dlg_forward(focal, allfocus, params.dlg, index, options);
  r.fused = fsfa(r.focal, params.reduce, &r.attention);
  r.allfocus = conv_gru(r.fused, allfocus, params.gru);
  return r;
}

StepTrace reciprocative_forward(const Tensor& focal0, const Tensor& allfocus0,
                                const RecipParams& params, const NeighborIndex& index,
                                std::size_t steps, const DlgOptions& options) {
  if (steps < 1) throw std::invalid_argument("reciprocative steps T must be >= 1");
  StepTrace trace;
  trace.focal.push_back(focal0);
  trace.allfocus.push_back(allfocus0);
  for (std::size_t t = 0; t < steps; ++t) {
    StepResult r = reciprocative_step(trace.focal.back(), trace.allfocus.back(), params, index, options);
    trace.focal.push_back(r.focal);
    trace.fused.push_back(r.fused);
    trace.attention.push_back(r.attention);
    trace.allfocus.push_back(r.allfocus);
    trace.side.push_back(side_map(r.allfocus, params.side));
  }
  return trace;
}

DecoderParams make_decoder_params(ParameterStore& store, std::size_t channels,
                                  std::size_t lowlevel_channels, SeededRng& rng) {
  DecoderParams p;
  p.skip = make_conv(store, "dec.skip", channels, lowlevel_channels, 1, rng);
  p.conv1 = make_conv(store, "dec.conv1", channels, channels, 3, rng);
  p.conv2 = make_conv(store, "dec.conv2", channels, channels, 3, rng);
  p.conv3 = make_conv(store, "dec.conv3", channels, channels, 3, rng);
  p.out = make_conv(store, "dec.out", 1, channels, 3, rng);
  return p;
}

Tensor refine_decode(const Tensor& allfocus, const Tensor& lowlevel, const DecoderParams& params,
                     std::size_t out_h, std::size_t out_w, bool use_skip) {
  if (out_h % 2 || out_w % 2)
    throw ShapeError("refine_decode: output extent must be even, got " + std::to_string(out_h) +
                     "x" + std::to_string(out_w));
  const std::size_t hh = out_h / 2, hw = out_w / 2;
  Tensor x = bilinear_resize(allfocus, hh, hw);
  if (use_skip) {
    if (lowlevel.rank() != 4 || lowlevel.dim(2) != hh || lowlevel.dim(3) != hw)
      throw ShapeError("refine_decode: lowlevel feature must be at 1/2 scale (" +
                       std::to_string(hh) + "x" + std::to_string(hw) + "), got " +
                       to_string(lowlevel.shape()));
    x = add(x, params.skip(lowlevel));
  }
  x = relu(params.conv1(x));
  x = relu(params.conv2(x));
  x = relu(params.conv3(x));
  return bilinear_resize(sigmoid(params.out(x)), out_h, out_w);
}

LossBreakdown total_loss(const std::vector<Tensor>& side, const Tensor& final_map, const Tensor& gt) {
  if (gt.rank() != 4 || gt.dim(0) != 1 || gt.dim(1) != 1)
    throw ShapeError("total_loss: gt must be [1,1,H,W], got " + to_string(gt.shape()));
  for (Real v : gt.data())
    if (v != Real(0) && v != Real(1))
      throw std::invalid_argument("total_loss: ground truth must be binary, found " + std::to_string(v));
  LossBreakdown out;
  out.total = bce_loss(final_map, gt);
  out.final_bce = bce_value(final_map, gt);
  out.value = out.final_bce;
  for (const Tensor& s : side) {
    const Tensor target = nearest_resize(gt, s.dim(2), s.dim(3));
    out.total = add(out.total, bce_loss(s, target));
    out.side_bce.push_back(bce_value(s, target));
    out.value += out.side_bce.back();
  }
  return out;
}

DLGNET_NAMESPACE_END
