#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <string>
#include <vector>

#include "dlgnet/graph.hpp"
#include "dlgnet/params.hpp"

DLGNET_NAMESPACE_BEGIN

/// Per-pixel softmax over slices of a 1-channel reduction, then the weighted
/// sum of slice features. focal [N,C,H,W] -> [1,C,H,W].
Tensor fsfa(const Tensor& focal, const Conv& reduce, Tensor* attention = nullptr);

struct GruParams {
  Conv update, reset, candidate;  // each 2C -> C
};

GruParams make_gru_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                          std::size_t kernel, SeededRng& rng);

/// Convolutional GRU: input x, state h, both [1,C,H,W].
Tensor conv_gru(const Tensor& x, const Tensor& h, const GruParams& gru);

struct RecipParams {
  DlgParams dlg;
  Conv reduce;  // fsfa.reduce
  GruParams gru;
  Conv side;  // side.head
};

RecipParams make_recip_params(ParameterStore& store, std::size_t channels,
                              std::size_t edge_channels, std::size_t gru_kernel, SeededRng& rng,
                              bool zero_out = false);

/// States t = 0..T; fused, attention and side hold t = 1..T.
struct StepTrace {
  std::vector<Tensor> focal;
  std::vector<Tensor> allfocus;
  std::vector<Tensor> fused;
  std::vector<Tensor> attention;
  std::vector<Tensor> side;

  std::size_t steps() const { return side.size(); }
};

/// One DLG + FSFA + GRU step.
struct StepResult {
  Tensor focal, fused, attention, allfocus;
};
StepResult reciprocative_step(const Tensor& focal, const Tensor& allfocus, const RecipParams& params,
                              const NeighborIndex& index, const DlgOptions& options = {});

StepTrace reciprocative_forward(const Tensor& focal0, const Tensor& allfocus0,
                                const RecipParams& params, const NeighborIndex& index,
                                std::size_t steps, const DlgOptions& options = {});

/// sigmoid(side(F_a)), the deep-supervision map at feature scale.
Tensor side_map(const Tensor& allfocus, const Conv& side);

struct DecoderParams {
  Conv skip;  // lowlevel -> C
  Conv conv1, conv2, conv3;
  Conv out;  // C -> 1
};

DecoderParams make_decoder_params(ParameterStore& store, std::size_t channels,
                                  std::size_t lowlevel_channels, SeededRng& rng);

/// Upsamples F_a to half resolution, optionally adds the projected stage-1
/// feature, runs three conv+ReLU and a sigmoid head, then upsamples to out_h x out_w.
Tensor refine_decode(const Tensor& allfocus, const Tensor& lowlevel, const DecoderParams& params,
                     std::size_t out_h, std::size_t out_w, bool use_skip = true);

struct LossBreakdown {
  Tensor total;
  double value = 0;  // the total accumulated in double
  double final_bce = 0;
  std::vector<double> side_bce;
};

/// BCE(final, gt) + sum_t BCE(side_t, nearest(gt)). gt is [1,1,H,W] with values in {0,1}.
LossBreakdown total_loss(const std::vector<Tensor>& side, const Tensor& final_map, const Tensor& gt);

DLGNET_NAMESPACE_END
