#include "dlgnet/encoder.hpp"

#include <stdexcept>

#include "dlgnet/ops.hpp"

DLGNET_NAMESPACE_BEGIN

void EncoderConfig::validate() const {
  if (stage_channels.size() < 4)
    throw std::invalid_argument("encoder needs at least 4 stages, got " +
                                std::to_string(stage_channels.size()));
  for (auto c : stage_channels)
    if (c == 0) throw std::invalid_argument("encoder stage width must be positive");
  if (out_channels == 0) throw std::invalid_argument("encoder out_channels must be positive");
  if (in_channels == 0) throw std::invalid_argument("encoder in_channels must be positive");
}

Tensor topdown_fuse(const std::vector<Tensor>& stage_feats, const TopDownParams& params) {
  if (stage_feats.size() != params.lateral.size() || stage_feats.empty())
    throw ShapeError("topdown_fuse: expected " + std::to_string(params.lateral.size()) +
                     " stage features, got " + std::to_string(stage_feats.size()));
  for (std::size_t i = 0; i + 1 < stage_feats.size(); ++i) {
    const auto& fine = stage_feats[i].shape();
    const auto& coarse = stage_feats[i + 1].shape();
    if (fine[2] != 2 * coarse[2] || fine[3] != 2 * coarse[3] || fine[0] != coarse[0])
      throw ShapeError("topdown_fuse: scale mismatch between " + to_string(fine) + " and " +
                       to_string(coarse));
  }
  Tensor acc = params.lateral.back()(stage_feats.back());
  for (std::size_t i = stage_feats.size() - 1; i-- > 0;) {
    const auto& s = stage_feats[i].shape();
    acc = add(params.lateral[i](stage_feats[i]), bilinear_resize(acc, s[2], s[3]));
  }
  return params.smooth(acc);
}

Encoder::Encoder(ParameterStore& store, const std::string& prefix, const EncoderConfig& config,
                 SeededRng rng)
    : config_(config) {
  config_.validate();
  std::size_t in = config_.in_channels;
  for (std::size_t s = 0; s < config_.stage_channels.size(); ++s) {
    const std::size_t out = config_.stage_channels[s];
    const std::string base = prefix + ".stage" + std::to_string(s + 1);
    convs_.push_back(make_conv(store, base + ".conv1", out, in, 3, rng));
    convs_.push_back(make_conv(store, base + ".conv2", out, out, 3, rng));
    in = out;
  }
  const std::size_t n = config_.stage_channels.size();
  for (std::size_t s = n - 3; s < n; ++s)
    topdown_.lateral.push_back(make_conv(store, prefix + ".lateral" + std::to_string(s + 1),
                                         config_.out_channels, config_.stage_channels[s], 1, rng));
  topdown_.smooth =
      make_conv(store, prefix + ".smooth", config_.out_channels, config_.out_channels, 3, rng);
}

FeaturePyramid Encoder::operator()(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != config_.in_channels)
    throw ShapeError("encoder expects [B," + std::to_string(config_.in_channels) +
                     ",H,W], got " + to_string(x.shape()));
  const std::size_t stride = std::size_t(1) << config_.stage_channels.size();
  if (x.dim(2) % stride || x.dim(3) % stride)
    throw ShapeError("encoder input " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                     " is not divisible by " + std::to_string(stride) +
                     "; resize it (data.resize) first");
  FeaturePyramid out;
  Tensor h = x;
  for (std::size_t s = 0; s < config_.stage_channels.size(); ++s) {
    h = relu(convs_[2 * s](h));
    h = relu(convs_[2 * s + 1](h));
    h = max_pool2x2(h);
    out.stages.push_back(h);
  }
  const std::size_t n = out.stages.size();
  out.fused = topdown_fuse({out.stages.begin() + std::ptrdiff_t(n - 3), out.stages.end()}, topdown_);
  out.lowlevel = out.stages.front();
  return out;
}

DLGNET_NAMESPACE_END
