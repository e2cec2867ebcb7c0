#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dlgnet/params.hpp"
#include "dlgnet/window.hpp"

DLGNET_NAMESPACE_BEGIN

/// Learnable maps of both local graphs. Every linear map is a 1x1 conv.
struct DlgParams {
  std::size_t channels = 0;
  std::size_t edge_channels = 0;  // C'
  Conv query_f, key_f, value_f, out_f;
  Conv query_a, key_a, value_a, out_a;
  Tensor score_weight;  // psi, [1, 2C', 1, 1]; first half sees the target
  Tensor score_bias;    // [1]
};

/// Registers prefix.{query_f,key_f,value_f,out_f,query_a,key_a,value_a,out_a,score_a}.
/// zero_out zero-initializes out_f and out_a so the update starts as the identity.
DlgParams make_dlg_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                          std::size_t edge_channels, SeededRng& rng, bool zero_out = false);

struct DlgOptions {
  bool use_ff = true;
  bool use_fa = true;
};

/// Attention weights from the last forward, channel-last as produced by the kernels.
struct DlgTrace {
  std::vector<Real> alpha_f;  // [loc][i][slot][j]
  std::vector<Real> alpha_a;  // [loc][i][slot]
  std::size_t slices = 0, slots = 0, locations = 0;
};

/// Fused focal-focal attention. query/key [N,C',H,W], value [N,C,H,W] -> [N,C,H,W].
Tensor focal_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                       const NeighborIndex& index, std::vector<Real>* alpha = nullptr);

/// Fused focal-all attention. target_score [N,1,H,W], guide_score [1,1,H,W],
/// guide_value [1,C,H,W] -> [N,C,H,W].
Tensor guidance_attention(const Tensor& target_score, const Tensor& guide_score,
                          const Tensor& guide_value, const NeighborIndex& index,
                          std::vector<Real>* alpha = nullptr);

/// F_f [N,C,H,W], F_a [1,C,H,W] -> updated F_f. Never materializes dense edges.
Tensor dlg_forward(const Tensor& focal, const Tensor& allfocus, const DlgParams& params,
                   const NeighborIndex& index, const DlgOptions& options = {},
                   DlgTrace* trace = nullptr);

// Per-node scalar formulation, used as a reference.

struct NodeId {
  int slice = 0;  // -1 for the all-focus node
  int y = 0, x = 0;
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

struct NeighborSets {
  std::vector<NodeId> targets;   // the N focal nodes at the location
  std::vector<NodeId> surround;  // focal nodes in the surrounding area
  std::vector<NodeId> guides;    // all-focus center and its surrounding area
};

NeighborSets neighbor_sets(int y, int x, std::size_t slices, const WindowSpec& spec,
                           std::size_t height, std::size_t width);

/// Applies a 1x1 conv to one C-vector, in double.
std::vector<double> apply_linear(const Conv& map, std::span<const double> h);

double edge_ff(std::span<const double> h_u, std::span<const double> h_v, const DlgParams& params);
double edge_fa(std::span<const double> h_u, std::span<const double> h_q, const DlgParams& params);

struct Messages {
  std::vector<double> focal;
  std::vector<double> guide;
};

/// Node embeddings as double C-vectors, looked up by NodeId.
class NodeFeatures {
 public:
  NodeFeatures(const Tensor& focal, const Tensor& allfocus);
  std::vector<double> operator()(const NodeId& id) const;
  std::size_t channels() const { return channels_; }

 private:
  std::vector<Real> focal_, allfocus_;
  std::size_t channels_, height_, width_;
};

Messages attention_messages(const NodeId& u, const NeighborSets& sets, const NodeFeatures& h,
                            const DlgParams& params);
std::vector<double> node_update(std::span<const double> h_u, const Messages& m,
                                const DlgParams& params, const DlgOptions& options = {});

/// Loops the scalar formulation over every target node.
Tensor dlg_reference_loop(const Tensor& focal, const Tensor& allfocus, const DlgParams& params,
                          const WindowSpec& spec, const DlgOptions& options = {});

DLGNET_NAMESPACE_END
