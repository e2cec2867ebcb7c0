#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dlgnet/model.hpp"
#include "dlgnet/ops.hpp"
#include "dlgnet/recip.hpp"

using namespace dlg;

namespace {

Tensor random_tensor(Shape shape, SeededRng& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(double(a.data()[i]) - double(b.data()[i])));
  return m;
}

bool identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

void fill(Tensor& t, Real v) { std::fill(t.data().begin(), t.data().end(), v); }

void randomize(ParameterStore& store, SeededRng& rng, double bound = 0.5) {
  for (auto& p : store.items())
    for (Real& v : p.value.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
}

}  // namespace

TEST_CASE("focal stack feature aggregation") {
  SeededRng rng(1);
  ParameterStore store;
  Conv reduce = make_conv(store, "reduce", 1, 3, 1, rng);
  randomize(store, rng);

  SUBCASE("a single slice passes through") {
    const Tensor f = random_tensor({1, 3, 4, 5}, rng);
    Tensor a;
    const Tensor o = fsfa(f, reduce, &a);
    CHECK(identical(o, f));
    for (Real v : a.data()) CHECK(v == 1);
  }
  SUBCASE("equal logits average the slices") {
    fill(reduce.weight, 0);
    const Tensor f = random_tensor({4, 3, 4, 5}, rng);
    const Tensor o = fsfa(f, reduce);
    const Tensor mean = scale(sum_axis0(f), Real(0.25));
    CHECK(max_abs_diff(o, mean) <= 1e-6);
  }
  SUBCASE("a dominant slice is selected") {
    fill(reduce.weight, 0);
    fill(reduce.bias, 0);
    reduce.weight.data()[0] = 1;
    Tensor f = random_tensor({4, 3, 2, 2}, rng);
    f.data()[(2 * 3 + 0) * 4 + 1] = 25;  // slice 2, channel 0, pixel 1: logit >= +20 above the rest
    const Tensor o = fsfa(f, reduce);
    for (std::size_t c = 0; c < 3; ++c) {
      const double want = f.data()[(2 * 3 + c) * 4 + 1];
      CHECK(std::abs(o.data()[c * 4 + 1] - want) <= 1e-6 * std::max(1.0, std::abs(want)));
    }
  }
  SUBCASE("convex combination with normalized weights") {
    double worst_sum = 0, worst_hull = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng.below(6), h = 1 + rng.below(6), w = 1 + rng.below(6);
      const Tensor f = random_tensor({n, 3, h, w}, rng, -3, 3);
      Tensor a;
      const Tensor o = fsfa(f, reduce, &a);
      const std::size_t plane = h * w;
      for (std::size_t p = 0; p < plane; ++p) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) total += a.data()[i * plane + p];
        worst_sum = std::max(worst_sum, std::abs(total - 1));
        for (std::size_t c = 0; c < 3; ++c) {
          double lo = 1e30, hi = -1e30;
          for (std::size_t i = 0; i < n; ++i) {
            lo = std::min(lo, double(f.data()[(i * 3 + c) * plane + p]));
            hi = std::max(hi, double(f.data()[(i * 3 + c) * plane + p]));
          }
          const double v = o.data()[c * plane + p];
          worst_hull = std::max({worst_hull, lo - v, v - hi});
        }
      }
    }
    CHECK(worst_sum <= 1e-6);
    CHECK(worst_hull <= 1e-6);
  }
  CHECK_THROWS_AS(fsfa(Tensor({0, 3, 2, 2}), reduce), ShapeError);
}

TEST_CASE("convolutional GRU") {
  SeededRng rng(2);

  SUBCASE("hand-evaluated scalar instance") {
    ParameterStore store;
    GruParams g = make_gru_params(store, "gru", 1, 1, rng);
    g.update.weight.data()[0] = Real(0.4);
    g.update.weight.data()[1] = Real(-0.2);
    g.update.bias.data()[0] = Real(0.1);
    g.reset.weight.data()[0] = Real(-0.3);
    g.reset.weight.data()[1] = Real(0.8);
    g.reset.bias.data()[0] = Real(0.05);
    g.candidate.weight.data()[0] = Real(0.7);
    g.candidate.weight.data()[1] = Real(0.6);
    g.candidate.bias.data()[0] = Real(-0.1);
    const Tensor out = conv_gru(Tensor::of({1, 1, 1, 1}, {Real(0.5)}), Tensor::of({1, 1, 1, 1}, {Real(-0.3)}), g);
    CHECK(double(out.item()) == doctest::Approx(-0.021157201605).epsilon(1e-6));
  }

  ParameterStore store;
  GruParams g = make_gru_params(store, "gru", 4, 3, rng);
  randomize(store, rng);
  const Tensor x = random_tensor({1, 4, 5, 6}, rng), h = random_tensor({1, 4, 5, 6}, rng);

  SUBCASE("closed update gate keeps the state") {
    fill(g.update.weight, 0);
    fill(g.update.bias, -200);
    CHECK(identical(conv_gru(x, h, g), h));
  }
  SUBCASE("open gates give the bounded candidate") {
    for (Conv* c : {&g.update, &g.reset}) {
      fill(c->weight, 0);
      fill(c->bias, 200);
    }
    const Tensor out = conv_gru(x, h, g);
    const Tensor cand = tanh(g.candidate(concat({x, h}, 1)));
    CHECK(max_abs_diff(out, cand) <= 1e-6);
    for (Real v : out.data()) CHECK(std::abs(v) < 1);
  }
  SUBCASE("output interpolates between state and candidate") {
    const Tensor r = sigmoid(g.reset(concat({x, h}, 1)));
    const Tensor cand = tanh(g.candidate(concat({x, mul(r, h)}, 1)));
    const Tensor out = conv_gru(x, h, g);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double lo = std::min(h.data()[i], cand.data()[i]), hi = std::max(h.data()[i], cand.data()[i]);
      CHECK(out.data()[i] >= lo - 1e-6);
      CHECK(out.data()[i] <= hi + 1e-6);
    }
  }
  CHECK_THROWS_AS(conv_gru(x, Tensor({1, 4, 5, 5}), g), ShapeError);
}

TEST_CASE("reciprocative unrolling") {
  SeededRng rng(3);
  ParameterStore store;
  RecipParams p = make_recip_params(store, 4, 4, 3, rng);
  randomize(store, rng, 0.4);
  const NeighborIndex index({3, {1, 3}}, 5, 5);
  const Tensor f0 = random_tensor({3, 4, 5, 5}, rng), a0 = random_tensor({1, 4, 5, 5}, rng);

  SUBCASE("T=2 equals two composed steps") {
    const StepTrace t = reciprocative_forward(f0, a0, p, index, 2);
    const StepResult s1 = reciprocative_step(f0, a0, p, index);
    const StepResult s2 = reciprocative_step(s1.focal, s1.allfocus, p, index);
    CHECK(t.steps() == 2);
    CHECK(t.focal.size() == 3);
    CHECK(identical(t.focal[2], s2.focal));
    CHECK(identical(t.allfocus[2], s2.allfocus));
    CHECK(identical(t.fused[1], s2.fused));
    CHECK(identical(t.side[1], side_map(s2.allfocus, p.side)));
  }
  SUBCASE("T=1 is a single DLG, FSFA and GRU pass") {
    const StepTrace t = reciprocative_forward(f0, a0, p, index, 1);
    const StepResult s = reciprocative_step(f0, a0, p, index);
    CHECK(t.steps() == 1);
    CHECK(identical(t.allfocus[1], s.allfocus));
  }
  SUBCASE("identity-preserving settings keep the all-focus state") {
    fill(p.gru.update.weight, 0);
    fill(p.gru.update.bias, -200);
    const StepTrace t = reciprocative_forward(f0, a0, p, index, 4);
    CHECK(identical(t.allfocus.back(), a0));
  }
  CHECK_THROWS_AS(reciprocative_forward(f0, a0, p, index, 0), std::invalid_argument);
}

TEST_CASE("decoder") {
  SeededRng rng(4);
  ParameterStore store;
  DecoderParams d = make_decoder_params(store, 8, 6, rng);
  randomize(store, rng, 0.4);
  const Tensor fa = random_tensor({1, 8, 4, 4}, rng), low = random_tensor({1, 6, 8, 8}, rng);
  const Tensor out = refine_decode(fa, low, d, 16, 16);
  CHECK(out.shape() == Shape{1, 1, 16, 16});
  for (Real v : out.data()) CHECK((v > 0 && v < 1));
  CHECK(max_abs_diff(out, refine_decode(fa, low, d, 16, 16, false)) > 0);

  fill(d.skip.bias, 0);
  CHECK(identical(refine_decode(fa, Tensor({1, 6, 8, 8}), d, 16, 16), refine_decode(fa, low, d, 16, 16, false)));
  CHECK_THROWS_AS(refine_decode(fa, Tensor({1, 6, 4, 4}), d, 16, 16), ShapeError);
  CHECK_THROWS_AS(refine_decode(fa, low, d, 15, 16), ShapeError);
}

TEST_CASE("deep supervision loss") {
  Tensor gt({1, 1, 8, 8});
  for (std::size_t i = 0; i < gt.size(); i += 3) gt.data()[i] = 1;
  const std::vector<Tensor> sides(3, Tensor::full({1, 1, 2, 2}, Real(0.5)));
  const LossBreakdown half = total_loss(sides, Tensor::full({1, 1, 8, 8}, Real(0.5)), gt);
  CHECK(half.side_bce.size() == 3);
  CHECK(half.final_bce == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  for (double s : half.side_bce) CHECK(s == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(half.value == doctest::Approx(4 * std::log(2.0)).epsilon(1e-6));
  CHECK(double(half.total.item()) == doctest::Approx(half.value).epsilon(1e-6));

  const Tensor side_gt = nearest_resize(gt, 2, 2);
  const LossBreakdown perfect = total_loss(std::vector<Tensor>(3, side_gt), gt, gt);
  CHECK(perfect.value <= 4 * 1e-6);
  CHECK_THROWS_AS(total_loss(sides, gt, Tensor({2, 1, 8, 8})), ShapeError);
}

TEST_CASE("model gradients reach every parameter through three steps") {
  ModelConfig config;
  config.steps = 3;
  config.init_phi_zero = false;
  const SaliencyModel model(config, 5);
  SeededRng rng(6);
  const Tensor af = random_tensor({1, 3, 32, 32}, rng, 0, 1), slices = random_tensor({2, 3, 32, 32}, rng, 0, 1);
  Tensor gt({1, 1, 32, 32});
  for (std::size_t y = 8; y < 24; ++y)
    for (std::size_t x = 10; x < 22; ++x) gt.data()[y * 32 + x] = 1;
  const ModelOutput out = model.forward(af, slices);
  CHECK(out.side.size() == 3);
  CHECK(out.final_map.shape() == Shape{1, 1, 32, 32});
  model.loss(out, gt).total.backward();
  for (const auto& p : model.params().items()) {
    INFO(p.name);
    const auto g = p.value.grad();
    CHECK(std::any_of(g.begin(), g.end(), [](Real v) { return v != 0; }));
  }
}

TEST_CASE("zero message projections make the graph stage an identity at init") {
  ModelConfig config;
  config.steps = 2;
  const SaliencyModel model(config, 7);
  SeededRng rng(8);
  const Tensor af = random_tensor({1, 3, 32, 32}, rng, 0, 1), slices = random_tensor({3, 3, 32, 32}, rng, 0, 1);
  const ModelOutput out = model.forward(af, slices);
  for (std::size_t t = 1; t < out.trace.focal.size(); ++t) CHECK(identical(out.trace.focal[t], out.trace.focal[0]));
}
