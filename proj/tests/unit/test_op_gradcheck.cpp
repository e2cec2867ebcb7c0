// Finite-difference checks of every differentiable op on random inputs.
// Built twice: against dlgcore (float) and dlgcore_f64 (double).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dlgnet/gradcheck.hpp"
#include "dlgnet/graph.hpp"
#include "dlgnet/ops.hpp"
#include "dlgnet/recip.hpp"

using namespace dlg;

namespace {

constexpr bool kDouble = sizeof(Real) == sizeof(double);
constexpr double kTolerance = kDouble ? 1e-6 : 1e-3;
constexpr double kEps = kDouble ? 1e-6 : 1e-2;

Tensor random_tensor(Shape shape, SeededRng& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape), Real(0), true);
  for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

struct OpCase {
  std::vector<Parameter> inputs;
  std::function<Tensor()> op;
};

// Checks d/dinputs of <op(inputs), w> for a fixed random w.
double check(OpCase& c, std::uint64_t seed) {
  Tensor probe = c.op();
  SeededRng rng(seed);
  std::vector<Real> w(probe.size());
  for (Real& v : w) v = static_cast<Real>(rng.uniform(-1, 1));
  const Tensor weights(probe.shape(), w);
  auto forward = [&] { return sum(mul(c.op(), weights)); };
  auto objective = [&] {
    const Tensor out = c.op();
    double acc = 0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += double(out.data()[i]) * double(w[i]);
    return acc;
  };
  GradcheckOptions opt;
  opt.eps = kEps;
  opt.zero_floor = kDouble ? 1e-9 : 1e-5;
  const auto entries = finite_difference_gradcheck(forward, objective, c.inputs, opt);
  for (const auto& e : entries) INFO(e.name << " rel " << e.rel_error << " kinked " << e.kinked);
  return max_rel_error(entries);
}

OpCase unary(std::function<Tensor(const Tensor&)> f, Shape shape, SeededRng& rng, double lo = -1,
             double hi = 1) {
  OpCase c;
  c.inputs = {{"x", random_tensor(shape, rng, lo, hi)}};
  Tensor x = c.inputs[0].value;
  c.op = [f, x] { return f(x); };
  return c;
}

OpCase binary(std::function<Tensor(const Tensor&, const Tensor&)> f, Shape shape, SeededRng& rng) {
  OpCase c;
  c.inputs = {{"a", random_tensor(shape, rng)}, {"b", random_tensor(shape, rng)}};
  Tensor a = c.inputs[0].value, b = c.inputs[1].value;
  c.op = [f, a, b] { return f(a, b); };
  return c;
}

}  // namespace

TEST_CASE("elementwise ops") {
  SeededRng rng(1);
  const Shape s{2, 3, 4};
  std::vector<std::pair<std::string, OpCase>> cases;
  cases.emplace_back("add", binary([](auto& a, auto& b) { return add(a, b); }, s, rng));
  cases.emplace_back("sub", binary([](auto& a, auto& b) { return sub(a, b); }, s, rng));
  cases.emplace_back("mul", binary([](auto& a, auto& b) { return mul(a, b); }, s, rng));
  cases.emplace_back("scale", unary([](auto& x) { return scale(x, Real(-1.7)); }, s, rng));
  cases.emplace_back("one_minus", unary([](auto& x) { return one_minus(x); }, s, rng));
  cases.emplace_back("relu", unary([](auto& x) { return relu(x); }, s, rng));
  cases.emplace_back("sigmoid", unary([](auto& x) { return sigmoid(x); }, s, rng, -3, 3));
  cases.emplace_back("tanh", unary([](auto& x) { return tanh(x); }, s, rng, -2, 2));
  for (auto& [name, c] : cases) {
    CAPTURE(name);
    CHECK(check(c, 7) <= kTolerance);
  }
}

TEST_CASE("conv2d, pooling and resizing") {
  SeededRng rng(2);
  for (std::size_t stride : {1, 2})
    for (std::size_t pad : {0, 1}) {
      OpCase c;
      c.inputs = {{"x", random_tensor({2, 3, 6, 5}, rng)},
                  {"w", random_tensor({4, 3, 3, 3}, rng)},
                  {"b", random_tensor({4}, rng)}};
      Tensor x = c.inputs[0].value, w = c.inputs[1].value, b = c.inputs[2].value;
      c.op = [=] { return conv2d(x, w, b, stride, pad); };
      CAPTURE(stride);
      CAPTURE(pad);
      CHECK(check(c, 3) <= kTolerance);
    }
  OpCase pool = unary([](auto& x) { return max_pool2x2(x); }, {1, 2, 4, 6}, rng);
  CHECK(check(pool, 4) <= kTolerance);
  OpCase up = unary([](auto& x) { return bilinear_resize(x, 7, 9); }, {1, 2, 3, 4}, rng);
  CHECK(check(up, 5) <= kTolerance);
  OpCase down = unary([](auto& x) { return bilinear_resize(x, 3, 2); }, {2, 1, 8, 5}, rng);
  CHECK(check(down, 6) <= kTolerance);
}

TEST_CASE("shape ops") {
  SeededRng rng(3);
  OpCase cat;
  cat.inputs = {{"a", random_tensor({2, 3, 2, 2}, rng)}, {"b", random_tensor({2, 1, 2, 2}, rng)}};
  Tensor a = cat.inputs[0].value, b = cat.inputs[1].value;
  cat.op = [=] { return concat({a, b, a}, 1); };
  CHECK(check(cat, 1) <= kTolerance);
  OpCase nar = unary([](auto& x) { return narrow(x, 1, 1, 2); }, {2, 4, 3}, rng);
  CHECK(check(nar, 2) <= kTolerance);
  OpCase sel = unary([](auto& x) { return index_select(x, {2, 0, 2, 1}); }, {3, 2, 2}, rng);
  CHECK(check(sel, 3) <= kTolerance);
  OpCase re = unary([](auto& x) { return reshape(x, {4, 6}); }, {2, 3, 4}, rng);
  CHECK(check(re, 4) <= kTolerance);
}

TEST_CASE("softmax and reductions") {
  SeededRng rng(4);
  for (std::size_t axis : {0, 1, 3}) {
    OpCase c = unary([axis](auto& x) { return softmax(x, axis); }, {3, 2, 2, 4}, rng, -2, 2);
    CAPTURE(axis);
    CHECK(check(c, 9) <= kTolerance);
  }
  OpCase bc;
  bc.inputs = {{"x", random_tensor({3, 4, 2, 2}, rng)}, {"a", random_tensor({3, 1, 2, 2}, rng)}};
  Tensor x = bc.inputs[0].value, a = bc.inputs[1].value;
  bc.op = [=] { return mul_channel_broadcast(x, a); };
  CHECK(check(bc, 1) <= kTolerance);
  OpCase s0 = unary([](auto& v) { return sum_axis0(v); }, {4, 2, 3}, rng);
  CHECK(check(s0, 2) <= kTolerance);
  OpCase s = unary([](auto& v) { return sum(v); }, {4, 3}, rng);
  CHECK(check(s, 3) <= kTolerance);
  OpCase m = unary([](auto& v) { return mean(v); }, {4, 3}, rng);
  CHECK(check(m, 4) <= kTolerance);
}

TEST_CASE("binary cross-entropy") {
  SeededRng rng(5);
  OpCase c = unary([](auto&) { return Tensor(); }, {1, 1, 4, 4}, rng, 0.2, 0.8);
  Tensor target({1, 1, 4, 4});
  for (std::size_t i = 0; i < target.size(); ++i) target.data()[i] = Real(i % 3 == 0);
  Tensor p = c.inputs[0].value;
  c.op = [=] { return bce_loss(p, target); };
  CHECK(check(c, 5) <= kTolerance);
}

TEST_CASE("graph attentions and the DLG update") {
  SeededRng rng(6);
  const WindowSpec spec{3, {1, 2}};
  const NeighborIndex index(spec, 4, 5);
  OpCase focal;
  focal.inputs = {{"q", random_tensor({3, 2, 4, 5}, rng)},
                  {"k", random_tensor({3, 2, 4, 5}, rng)},
                  {"v", random_tensor({3, 3, 4, 5}, rng)}};
  Tensor q = focal.inputs[0].value, k = focal.inputs[1].value, v = focal.inputs[2].value;
  focal.op = [=, &index] { return focal_attention(q, k, v, index); };
  CHECK(check(focal, 1) <= kTolerance);

  OpCase guide;
  guide.inputs = {{"t", random_tensor({3, 1, 4, 5}, rng)},
                  {"g", random_tensor({1, 1, 4, 5}, rng)},
                  {"v", random_tensor({1, 3, 4, 5}, rng)}};
  Tensor t = guide.inputs[0].value, g = guide.inputs[1].value, gv = guide.inputs[2].value;
  guide.op = [=, &index] { return guidance_attention(t, g, gv, index); };
  CHECK(check(guide, 2) <= kTolerance);

  ParameterStore store;
  SeededRng init(7);
  const DlgParams params = make_dlg_params(store, "dlg", 3, 2, init);
  OpCase full;
  full.inputs = store.items();
  full.inputs.push_back({"focal", random_tensor({2, 3, 4, 5}, rng)});
  full.inputs.push_back({"allfocus", random_tensor({1, 3, 4, 5}, rng)});
  Tensor f = full.inputs[full.inputs.size() - 2].value, fa = full.inputs.back().value;
  full.op = [=, &index] { return dlg_forward(f, fa, params, index); };
  CHECK(check(full, 3) <= kTolerance);
}

TEST_CASE("FSFA and ConvGRU") {
  SeededRng rng(8);
  ParameterStore store;
  SeededRng init(9);
  const Conv reduce = make_conv(store, "reduce", 1, 3, 1, init);
  const GruParams gru = make_gru_params(store, "gru", 3, 3, init);
  for (auto& p : store.items())
    for (Real& v : p.value.data()) v = static_cast<Real>(init.uniform(-0.8, 0.8));
  OpCase c;
  c.inputs = store.items();
  c.inputs.push_back({"focal", random_tensor({4, 3, 3, 4}, rng)});
  c.inputs.push_back({"h", random_tensor({1, 3, 3, 4}, rng)});
  Tensor f = c.inputs[c.inputs.size() - 2].value, h = c.inputs.back().value;
  c.op = [=] { return conv_gru(fsfa(f, reduce), h, gru); };
  CHECK(check(c, 4) <= kTolerance);
}

TEST_CASE("the checker itself") {
  SeededRng rng(10);
  SUBCASE("exact for a linear model") {
    OpCase c;
    c.inputs = {{"w", random_tensor({3, 2, 1, 1}, rng)}, {"b", random_tensor({3}, rng)}};
    const Tensor x = random_tensor({2, 2, 3, 3}, rng);
    Tensor w = c.inputs[0].value, b = c.inputs[1].value;
    c.op = [=] { return conv2d(x, w, b); };
    CHECK(check(c, 1) <= (kDouble ? 1e-8 : 1e-5));
  }
  SUBCASE("a doubled gradient is detected") {
    Tensor x = random_tensor({5}, rng);
    std::vector<Parameter> params{{"x", x}};
    auto doubled = [&] {
      // 2 * d/dx reaches the grad, while the value is sum(x^2)/2.
      const Tensor y = sum(mul(x, x));
      const Tensor half = scale(y.detach(), Real(0.5));
      return add(sub(y, y.detach()), half);
    };
    const auto entries = finite_difference_gradcheck(doubled, params);
    CHECK(entries[0].rel_error == doctest::Approx(1.0).epsilon(0.01));
    CHECK(entries[0].analytic_norm == doctest::Approx(2 * entries[0].numeric_norm).epsilon(0.01));
  }
  SUBCASE("a nondeterministic forward is refused") {
    Tensor x = random_tensor({3}, rng);
    std::vector<Parameter> params{{"x", x}};
    int calls = 0;
    auto flaky = [&] { return scale(sum(x), Real(1 + 0.1 * (++calls))); };
    CHECK_THROWS_AS(finite_difference_gradcheck(flaky, params), NondeterministicForward);
  }
}
