#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace dlg {

struct DoubleGradcheck {
  std::size_t groups = 0;
  double max_rel_error = 0;
  std::string worst;
  std::size_t kinked = 0;
  double tolerance = 0;
  double seconds = 0;
};

/// The model gradient suite run by the double precision library. Only
/// dlgcore_f64 defines this, so single precision programs link both.
DoubleGradcheck run_double_gradcheck(std::uint64_t seed, std::size_t max_coords = 0);

}  // namespace dlg
