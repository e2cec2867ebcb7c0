#include "dlgnet/double_gradcheck.hpp"

#include "dlgnet/checks.hpp"

static_assert(sizeof(dlg::Real) == sizeof(double), "built only into the double precision library");

namespace dlg {

DoubleGradcheck run_double_gradcheck(std::uint64_t seed, std::size_t max_coords) {
  GradSuiteOptions go;
  go.seed = seed;
  go.gradcheck.seed = seed;
  go.gradcheck.max_coords = max_coords;
  const GradSuiteResult r = run_model_gradcheck(go);
  DoubleGradcheck out;
  out.groups = r.entries.size();
  out.max_rel_error = r.max_rel_error;
  out.worst = r.worst;
  out.kinked = r.kinked;
  out.tolerance = kGradcheckTolerance;
  out.seconds = r.seconds;
  return out;
}

}  // namespace dlg
