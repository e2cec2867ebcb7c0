#include "dlgnet/complexity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "dlgnet/graph.hpp"

DLGNET_NAMESPACE_BEGIN

std::uint64_t local_edge_count(std::size_t n, std::size_t h, std::size_t w, const WindowSpec& spec) {
  const std::uint64_t k = union_offsets(spec).size();
  return std::uint64_t(n) * h * w * (n + 1) * (k + 1);
}

std::uint64_t valid_edge_count(std::size_t n, std::size_t h, std::size_t w, const WindowSpec& spec) {
  std::uint64_t sites = std::uint64_t(h) * w;
  for (const Offset& o : union_offsets(spec)) {
    const long rows = long(h) - std::abs(o.dy), cols = long(w) - std::abs(o.dx);
    if (rows > 0 && cols > 0) sites += std::uint64_t(rows) * std::uint64_t(cols);
  }
  return std::uint64_t(n) * (n + 1) * sites;
}

std::uint64_t dense_edge_count(std::size_t n, std::size_t h, std::size_t w) {
  const std::uint64_t nodes = std::uint64_t(n + 1) * h * w;
  return nodes * nodes;
}

EdgeTally measure_edges(std::size_t n, std::size_t h, std::size_t w, const WindowSpec& spec) {
  const NeighborIndex index(spec, h, w);
  EdgeTally t;
  for (std::size_t p = 0; p < index.locations(); ++p)
    for (std::size_t s = 0; s < index.slots(); ++s)
      for (std::size_t i = 0; i < n; ++i) {
        // n focal sources plus one all-focus source per slot
        t.window += n + 1;
        if (index.valid(p, s)) t.valid += n + 1;
      }
  return t;
}

std::vector<ComplexityRow> audit_complexity(const std::vector<SizeSetting>& sizes,
                                            const AuditOptions& options) {
  std::vector<ComplexityRow> rows;
  for (const auto& size : sizes) {
    ComplexityRow row;
    row.size = size;
    row.spec = options.spec;
    row.edges_local = local_edge_count(size.n, size.h, size.w, options.spec);
    row.edges_dense_formula = dense_edge_count(size.n, size.h, size.w);
    row.edges_valid = valid_edge_count(size.n, size.h, size.w, options.spec);
    const EdgeTally tally = measure_edges(size.n, size.h, size.w, options.spec);
    row.counts_match = tally.window == row.edges_local && tally.valid == row.edges_valid;

    SeededRng rng(mix_seed(options.seed, size.n * 1000003 + size.h * 1009 + size.w));
    ParameterStore store;
    const DlgParams params = make_dlg_params(store, "dlg", size.c, size.c, rng);
    std::vector<Real> f(size.n * size.c * size.h * size.w), a(size.c * size.h * size.w);
    for (auto& v : f) v = Real(rng.normal());
    for (auto& v : a) v = Real(rng.normal());
    const Tensor focal({size.n, size.c, size.h, size.w}, std::move(f));
    const Tensor allfocus({1, size.c, size.h, size.w}, std::move(a));
    const NeighborIndex index(options.spec, size.h, size.w);
    NoGradGuard guard;
    dlg_forward(focal, allfocus, params, index);  // warm-up
    std::vector<double> times;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, options.repeats); ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor out = dlg_forward(focal, allfocus, params, index);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + std::ptrdiff_t(times.size() / 2), times.end());
    row.ms = times[times.size() / 2];
    rows.push_back(row);
  }
  return rows;
}

double fitted_slope(const std::vector<ComplexityRow>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("fitted_slope needs at least two rows");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double x = std::log(double(r.size.n * r.size.h * r.size.w));
    const double y = std::log(std::max(r.ms, 1e-9));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = double(rows.size());
  const double den = m * sxx - sx * sx;
  if (den == 0) throw std::invalid_argument("fitted_slope needs distinct problem sizes");
  return (m * sxy - sx * sy) / den;
}

void write_complexity_csv(const std::filesystem::path& path, const std::vector<ComplexityRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "n,h,w,k,dilations,edges_local,edges_dense_formula,ms,edges_valid\n";
  for (const auto& r : rows)
    os << r.size.n << ',' << r.size.h << ',' << r.size.w << ',' << r.spec.k << ','
       << r.spec.dilations_string() << ',' << r.edges_local << ',' << r.edges_dense_formula << ','
       << r.ms << ',' << r.edges_valid << '\n';
}

DLGNET_NAMESPACE_END
