#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dlgnet/graph.hpp"

DLGNET_NAMESPACE_BEGIN

/// Largest (N+1)*H*W the oracle accepts.
inline constexpr std::size_t kDenseOracleLimit = 512;

enum class EdgeKind : std::uint8_t { focal_focal, focal_all };

struct DenseEdge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  EdgeKind kind = EdgeKind::focal_focal;
};

/// Explicit node and edge lists. Node ids: slice * H*W + loc for focal nodes,
/// N * H*W + loc for all-focus nodes. Edges point from context to target.
struct DenseGraph {
  std::size_t slices = 0, height = 0, width = 0;
  std::vector<NodeId> nodes;
  std::vector<DenseEdge> edges;
  /// Window slots that fell outside the map and were dropped.
  std::uint64_t masked_edges = 0;

  std::uint64_t count(EdgeKind kind) const;
  /// Valid plus masked edges: the per-location window budget.
  std::uint64_t window_edges() const { return edges.size() + masked_edges; }
};

/// Throws std::length_error when (N+1)*H*W exceeds kDenseOracleLimit.
DenseGraph build_dense_graph(std::size_t slices, std::size_t height, std::size_t width,
                             const WindowSpec& spec);

/// Edge-by-edge evaluation of the DLG update in double precision.
Tensor dense_oracle(const Tensor& focal, const Tensor& allfocus, const DlgParams& params,
                    const WindowSpec& spec, const DlgOptions& options = {});

DLGNET_NAMESPACE_END
