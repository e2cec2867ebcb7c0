#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlgnet/window.hpp"

DLGNET_NAMESPACE_BEGIN

/// Window budget of the local graphs: N*HW*(N+1)*(K+1), K = distinct surrounding offsets.
std::uint64_t local_edge_count(std::size_t n, std::size_t h, std::size_t w, const WindowSpec& spec);
/// Edges that stay inside the map: N*(N+1)*(HW + sum_o (H-|dy|)+ (W-|dx|)+).
std::uint64_t valid_edge_count(std::size_t n, std::size_t h, std::size_t w, const WindowSpec& spec);
/// ((N+1)*HW)^2 edges of a fully connected graph over all nodes.
std::uint64_t dense_edge_count(std::size_t n, std::size_t h, std::size_t w);

struct EdgeTally {
  std::uint64_t window = 0;  // every (target, slot, source) visited by the kernels
  std::uint64_t valid = 0;   // the subset whose source lies inside the map
};

/// Counts edges by walking the neighbor table the kernels use.
EdgeTally measure_edges(std::size_t n, std::size_t h, std::size_t w, const WindowSpec& spec);

struct SizeSetting {
  std::size_t n = 4, h = 16, w = 16, c = 16;
};

struct ComplexityRow {
  SizeSetting size;
  WindowSpec spec;
  std::uint64_t edges_local = 0;
  std::uint64_t edges_dense_formula = 0;
  std::uint64_t edges_valid = 0;
  bool counts_match = false;  // measured tallies equal both closed forms
  double ms = 0;              // median dlg_forward time
};

struct AuditOptions {
  WindowSpec spec;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
};

std::vector<ComplexityRow> audit_complexity(const std::vector<SizeSetting>& sizes,
                                            const AuditOptions& options = {});

/// Least-squares slope of log(ms) against log(N*HW).
double fitted_slope(const std::vector<ComplexityRow>& rows);

/// Columns: n,h,w,k,dilations,edges_local,edges_dense_formula,ms,edges_valid
void write_complexity_csv(const std::filesystem::path& path, const std::vector<ComplexityRow>& rows);

DLGNET_NAMESPACE_END
