#include "dlgnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

DLGNET_NAMESPACE_BEGIN

std::vector<GradcheckEntry> finite_difference_gradcheck(const std::function<Tensor()>& forward,
                                                        std::vector<Parameter>& params,
                                                        const GradcheckOptions& options) {
  return finite_difference_gradcheck(forward, [&] { return double(forward().item()); }, params,
                                     options);
}

std::vector<GradcheckEntry> finite_difference_gradcheck(const std::function<Tensor()>& forward,
                                                        const std::function<double()>& objective,
                                                        std::vector<Parameter>& params,
                                                        const GradcheckOptions& options) {
  for (auto& p : params) p.value.zero_grad();
  forward().backward();

  std::uint64_t branches = 0;
  auto evaluate = [&] {
    NoGradGuard guard;
    BranchTrace trace;
    const double v = objective();
    branches = trace.digest();
    return v;
  };
  const double reference = evaluate();
  const std::uint64_t reference_branches = branches;
  const double again = evaluate();
  if (again != reference)
    throw NondeterministicForward("forward is not deterministic: " + std::to_string(reference) +
                                  " vs " + std::to_string(again));

  SeededRng rng(options.seed);
  std::vector<GradcheckEntry> report;
  for (auto& p : params) {
    Tensor& value = p.value;
    const std::vector<Real> analytic = value.has_grad()
                                           ? std::vector<Real>(value.grad().begin(), value.grad().end())
                                           : std::vector<Real>(value.size(), Real(0));
    std::vector<std::size_t> coords = rng.permutation(value.size());
    if (options.max_coords && coords.size() > options.max_coords) coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());

    GradcheckEntry e;
    e.name = p.name;

    double diff2 = 0, a2 = 0, n2 = 0;
    auto data = value.data();
    for (std::size_t c : coords) {
      const Real saved = data[c];
      data[c] = static_cast<Real>(saved + options.eps);
      const double up = evaluate();
      bool kink = branches != reference_branches;
      data[c] = static_cast<Real>(saved - options.eps);
      const double down = evaluate();
      kink = kink || branches != reference_branches;
      data[c] = saved;
      if (kink && options.skip_kinks) {
        ++e.kinked;
        continue;
      }
      // Use the step actually representable in Real.
      const double step = double(static_cast<Real>(saved + options.eps)) -
                          double(static_cast<Real>(saved - options.eps));
      const double numeric = (up - down) / step;
      const double a = analytic[c];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    e.checked = coords.size() - e.kinked;
    e.analytic_norm = std::sqrt(a2);
    e.numeric_norm = std::sqrt(n2);
    const double diff = std::sqrt(diff2);
    if (e.numeric_norm > options.zero_floor)
      e.rel_error = diff / e.numeric_norm;
    else if (e.analytic_norm > options.zero_floor)
      e.rel_error = diff / e.analytic_norm;
    else
      e.rel_error = 0.0;
    report.push_back(e);
  }
  return report;
}

double max_rel_error(const std::vector<GradcheckEntry>& entries) {
  double m = 0;
  for (const auto& e : entries) m = std::max(m, e.rel_error);
  return m;
}

DLGNET_NAMESPACE_END
