#include "dlgnet/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dlgnet/dense_oracle.hpp"
#include "dlgnet/graph.hpp"
#include "dlgnet/scene.hpp"
#include "dlgnet/trainer.hpp"

DLGNET_NAMESPACE_BEGIN

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor normal_tensor(Shape shape, SeededRng& rng) {
  std::vector<Real> v(numel(shape));
  for (auto& x : v) x = Real(rng.normal());
  return Tensor(std::move(shape), std::move(v));
}

double max_abs(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a.data()[i]) - b.data()[i]));
  return m;
}

}  // namespace

OracleSuiteResult run_oracle_suite(const OracleSuiteOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  OracleSuiteResult r;
  SeededRng rng(options.seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + std::size_t(rng.below(hi - lo + 1)); };
  for (std::size_t it = 0; it < options.instances; ++it) {
    const std::size_t n = pick(1, options.max_slices);
    const std::size_t h = pick(options.min_extent, options.max_extent);
    const std::size_t w = pick(options.min_extent, options.max_extent);
    const std::size_t c = pick(options.min_channels, options.max_channels);
    WindowSpec spec;
    spec.k = 3;
    spec.dilations = rng.coin() ? std::vector<int>{1, 3} : std::vector<int>{1};
    ParameterStore store;
    const DlgParams params = make_dlg_params(store, "dlg", c, pick(1, c), rng);
    for (auto& p : store.items())
      for (auto& v : p.value.data()) v = Real(0.5 * rng.normal());
    const Tensor focal = normal_tensor({n, c, h, w}, rng);
    const Tensor allfocus = normal_tensor({1, c, h, w}, rng);
    const NeighborIndex index(spec, h, w);
    for (std::size_t p = 0; p < index.locations(); ++p)
      if (index.valid_slots(p) < index.slots()) r.boundary_targets += n;
    Tensor fast;
    {
      NoGradGuard guard;
      fast = dlg_forward(focal, allfocus, params, index);
    }
    r.max_abs_diff = std::max(r.max_abs_diff, max_abs(fast, dense_oracle(focal, allfocus, params, spec)));
    r.max_loop_diff =
        std::max(r.max_loop_diff, max_abs(fast, dlg_reference_loop(focal, allfocus, params, spec)));
    ++r.instances;
  }
  r.seconds = seconds_since(t0);
  return r;
}

ModelConfig gradcheck_model_config(const GradSuiteOptions& options) {
  ModelConfig m;
  m.encoder.stage_channels = {options.channels, options.channels, options.channels, options.channels};
  m.channels = options.channels;
  m.edge_channels = options.channels;
  m.steps = options.steps;
  m.skip = true;
  return m;
}

GradSuiteResult run_model_gradcheck(const GradSuiteOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  SaliencyModel model(gradcheck_model_config(options), options.seed);
  if (options.well_conditioned) {
    SeededRng init(mix_seed(options.seed, 31));
    for (auto& p : model.params().items()) {
      const bool bias = p.value.rank() == 1;
      const double sd = bias ? options.bias_scale
                             : std::sqrt(2.0 * double(p.value.dim(0)) / double(p.value.size()));
      for (auto& v : p.value.data()) v = Real(sd * init.normal());
    }
  }
  SceneRanges ranges;
  ranges.height = ranges.width = options.size;
  ranges.min_slices = ranges.max_slices = options.slices;
  SeededRng rng(mix_seed(options.seed, 77));
  const SceneSpec spec = random_scene_spec(ranges, rng);
  const Batch batch = make_batch(gen_synthetic_sample(spec, rng));
  auto forward = [&] {
    const ModelOutput out = model.forward(batch.allfocus, batch.slices);
    return model.loss(out, batch.gt).total;
  };
  auto objective = [&] {
    const ModelOutput out = model.forward(batch.allfocus, batch.slices);
    return model.loss(out, batch.gt).value;
  };
  GradSuiteResult r;
  r.entries = finite_difference_gradcheck(forward, objective, model.params().items(), options.gradcheck);
  r.max_rel_error = max_rel_error(r.entries);
  for (const auto& e : r.entries) {
    r.kinked += e.kinked;
    if (r.worst.empty() || e.rel_error == r.max_rel_error) r.worst = e.name;
  }
  r.parameters = model.params().scalar_count();
  r.seconds = seconds_since(t0);
  return r;
}

DLGNET_NAMESPACE_END
