#include "dlgnet/model.hpp"

#include <stdexcept>

#include "dlgnet/ops.hpp"

DLGNET_NAMESPACE_BEGIN

namespace {

ModelConfig normalized(ModelConfig c) {
  c.encoder.out_channels = c.channels;
  c.validate();
  return c;
}

}  // namespace

Fusion parse_fusion(const std::string& name) {
  if (name == "dlg") return Fusion::dlg;
  if (name == "concat") return Fusion::concat;
  if (name == "gru") return Fusion::gru;
  throw std::invalid_argument("unknown fusion '" + name + "' (expected dlg, concat or gru)");
}

std::string fusion_name(Fusion f) {
  switch (f) {
    case Fusion::dlg: return "dlg";
    case Fusion::concat: return "concat";
    case Fusion::gru: return "gru";
  }
  return "?";
}

void ModelConfig::validate() const {
  encoder.validate();
  window.validate();
  if (channels == 0 || edge_channels == 0) throw std::invalid_argument("model.c and model.c_edge must be positive");
  if (steps < 1) throw std::invalid_argument("recip.t must be >= 1");
  if (gru_kernel % 2 == 0) throw std::invalid_argument("gru.kernel must be odd");
  if (concat_slices == 0) throw std::invalid_argument("concat slice count must be positive");
  if (fusion == Fusion::dlg && !dlg.use_ff && !dlg.use_fa)
    throw std::invalid_argument("dlg.use_ff and dlg.use_fa cannot both be off");
}

SaliencyModel::SaliencyModel(const ModelConfig& config, std::uint64_t seed)
    : config_(normalized(config)),
      store_(config_.init),
      enc_a_(store_, "enc_a", config_.encoder, SeededRng(seed).fork(0)),
      enc_f_(store_, "enc_f", config_.encoder, SeededRng(seed).fork(1)) {
  SeededRng rng = SeededRng(seed).fork(2);
  const std::size_t c = config_.channels;
  recip_ = make_recip_params(store_, c, config_.edge_channels, config_.gru_kernel, rng,
                             config_.init_phi_zero);
  decoder_ = make_decoder_params(store_, c, config_.encoder.stage_channels.front(), rng);
  if (config_.fusion == Fusion::concat)
    concat_fuse_ = make_conv(store_, "concat.fuse", c, (config_.concat_slices + 1) * c, 3, rng);
}

const NeighborIndex& SaliencyModel::index_for(std::size_t h, std::size_t w) const {
  for (const auto& idx : index_cache_)
    if (idx.height() == h && idx.width() == w) return idx;
  index_cache_.emplace_back(config_.window, h, w);
  return index_cache_.back();
}

ModelOutput SaliencyModel::forward(const Tensor& allfocus, const Tensor& slices) const {
  if (allfocus.rank() != 4 || allfocus.dim(0) != 1 || slices.rank() != 4 || slices.dim(0) == 0 ||
      allfocus.dim(2) != slices.dim(2) || allfocus.dim(3) != slices.dim(3))
    throw ShapeError("model expects allfocus [1,3,H,W] and slices [N,3,H,W], got " +
                     to_string(allfocus.shape()) + " and " + to_string(slices.shape()));
  const std::size_t h = allfocus.dim(2), w = allfocus.dim(3);
  const FeaturePyramid pa = enc_a_(allfocus);
  const FeaturePyramid pf = enc_f_(slices);
  ModelOutput out;
  Tensor state;
  switch (config_.fusion) {
    case Fusion::dlg: {
      const auto& index = index_for(pa.fused.dim(2), pa.fused.dim(3));
      out.trace = reciprocative_forward(pf.fused, pa.fused, recip_, index, config_.steps, config_.dlg);
      out.side = out.trace.side;
      state = out.trace.allfocus.back();
      break;
    }
    case Fusion::concat: {
      const std::size_t n = slices.dim(0), fh = pf.fused.dim(2), fw = pf.fused.dim(3);
      std::vector<std::size_t> pick(config_.concat_slices);
      for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i % n;
      const Tensor stacked = reshape(index_select(pf.fused, pick),
                                     {1, config_.concat_slices * config_.channels, fh, fw});
      state = relu(concat_fuse_(concat({pa.fused, stacked}, 1)));
      out.side.push_back(side_map(state, recip_.side));
      break;
    }
    case Fusion::gru: {
      state = pa.fused;
      for (std::size_t i = 0; i < slices.dim(0); ++i)
        state = conv_gru(narrow(pf.fused, 0, i, 1), state, recip_.gru);
      out.side.push_back(side_map(state, recip_.side));
      break;
    }
  }
  out.final_map = refine_decode(state, pa.lowlevel, decoder_, h, w, config_.skip);
  return out;
}

LossBreakdown SaliencyModel::loss(const ModelOutput& out, const Tensor& gt) const {
  return total_loss(out.side, out.final_map, gt);
}

DLGNET_NAMESPACE_END
