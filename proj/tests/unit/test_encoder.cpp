#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dlgnet/encoder.hpp"
#include "dlgnet/ops.hpp"

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

Tensor pointwise(const Conv& map, const Tensor& x) {
  const std::size_t b = x.dim(0), ci = x.dim(1), plane = x.dim(2) * x.dim(3), co = map.weight.dim(0);
  Tensor y({b, co, x.dim(2), x.dim(3)});
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t p = 0; p < plane; ++p) {
        double acc = map.bias.data()[o];
        for (std::size_t c = 0; c < ci; ++c)
          acc += double(map.weight.data()[o * ci + c]) * double(x.data()[(n * ci + c) * plane + p]);
        y.data()[(n * co + o) * plane + p] = Real(acc);
      }
  return y;
}

// Absolute difference relative to the larger of 1 and the reference magnitude.
double scaled_diff(const Tensor& got, const Tensor& ref) {
  double peak = 1;
  for (Real v : ref.data()) peak = std::max(peak, std::abs(double(v)));
  return max_abs_diff(got, ref) / peak;
}

void randomize(ParameterStore& store, SeededRng& rng) {
  for (auto& p : store.items())
    for (Real& v : p.value.data()) v = static_cast<Real>(rng.uniform(-0.3, 0.3));
}

}  // namespace

TEST_CASE("encoder config validation") {
  EncoderConfig c;
  CHECK_NOTHROW(c.validate());
  c.stage_channels = {8, 8, 8};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.stage_channels = {8, 0, 8, 8};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.stage_channels = {8, 8, 8, 8};
  c.out_channels = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("pyramid shapes") {
  ParameterStore store;
  EncoderConfig c;
  c.out_channels = 32;
  const Encoder enc(store, "enc", c, SeededRng(1));
  SeededRng rng(2);
  const FeaturePyramid p = enc(random_tensor({1, 3, 64, 64}, rng, 0, 1));
  CHECK(p.fused.shape() == Shape{1, 32, 16, 16});
  CHECK(p.lowlevel.shape() == Shape{1, 16, 32, 32});
  REQUIRE(p.stages.size() == 4);
  CHECK(p.stages[3].shape() == Shape{1, 32, 4, 4});

  ParameterStore store16;
  const Encoder small(store16, "f", EncoderConfig{}, SeededRng(3));
  const FeaturePyramid q = small(random_tensor({12, 3, 64, 64}, rng, 0, 1));
  CHECK(q.fused.shape() == Shape{12, 16, 16, 16});
  const FeaturePyramid r = small(random_tensor({2, 3, 48, 32}, rng, 0, 1));
  CHECK(r.fused.shape() == Shape{2, 16, 12, 8});
  CHECK(r.lowlevel.shape() == Shape{2, 16, 24, 16});
  CHECK_THROWS_AS(small(Tensor({1, 3, 40, 32})), ShapeError);
}

TEST_CASE("zero input with zero biases gives zero features") {
  ParameterStore store;
  const Encoder enc(store, "enc", EncoderConfig{}, SeededRng(4));
  const FeaturePyramid p = enc(Tensor({1, 3, 32, 32}));
  for (const Tensor& s : p.stages)
    for (Real v : s.data()) CHECK(v == 0);
  for (Real v : p.fused.data()) CHECK(v == 0);
}

TEST_CASE("different seeds give different features") {
  SeededRng rng(5);
  const Tensor x = random_tensor({1, 3, 32, 32}, rng, 0, 1);
  ParameterStore s1, s2;
  const Encoder a(s1, "enc", EncoderConfig{}, SeededRng(6));
  const Encoder b(s2, "enc", EncoderConfig{}, SeededRng(7));
  CHECK(max_abs_diff(a(x).fused, b(x).fused) > 0);
  ParameterStore s3;
  const Encoder c(s3, "enc", EncoderConfig{}, SeededRng(6));
  CHECK(max_abs_diff(a(x).fused, c(x).fused) == 0);
}

TEST_CASE("slices are encoded independently") {
  ParameterStore store;
  const Encoder enc(store, "f", EncoderConfig{}, SeededRng(8));
  SeededRng rng(9);
  const Tensor x = random_tensor({5, 3, 32, 32}, rng, 0, 1);
  const Tensor all = enc(x).fused;
  for (std::size_t i = 0; i < 5; ++i) {
    const Tensor one = enc(index_select(x, {i})).fused;
    CHECK(max_abs_diff(one, index_select(all, {i})) <= 1e-6);
  }
  const auto perm = rng.permutation(5);
  CHECK(max_abs_diff(enc(index_select(x, perm)).fused, index_select(all, perm)) <= 1e-6);
}

TEST_CASE("top-down fusion") {
  ParameterStore store;
  const Encoder enc(store, "enc", EncoderConfig{}, SeededRng(10));
  SeededRng rng(11);
  randomize(store, rng);
  const TopDownParams& td = enc.topdown();
  const Tensor s4 = random_tensor({2, 32, 8, 8}, rng), s8 = random_tensor({2, 32, 4, 4}, rng);
  const Tensor s16 = random_tensor({2, 32, 2, 2}, rng);

  const Tensor coarse = pointwise(td.lateral[2], s16);
  const Tensor mid = add(pointwise(td.lateral[1], s8), bilinear_resize(coarse, 4, 4));
  const Tensor fine = add(pointwise(td.lateral[0], s4), bilinear_resize(mid, 8, 8));
  const Tensor expected = conv2d(fine, td.smooth.weight, td.smooth.bias, 1, 1);
  const Tensor fused = topdown_fuse({s4, s8, s16}, td);
  CHECK(fused.shape() == Shape{2, 16, 8, 8});
  CHECK(scaled_diff(fused, expected) <= 1e-6);

  const Tensor only_fine =
      topdown_fuse({s4, Tensor({2, 32, 4, 4}), Tensor({2, 32, 2, 2})}, TopDownParams{td.lateral, td.smooth});
  std::vector<Conv> zero_bias = td.lateral;
  for (std::size_t i = 1; i < 3; ++i) zero_bias[i].bias = Tensor::zeros(zero_bias[i].bias.shape());
  const Tensor no_deep = topdown_fuse({s4, Tensor({2, 32, 4, 4}), Tensor({2, 32, 2, 2})}, {zero_bias, td.smooth});
  const Tensor proj = conv2d(pointwise(td.lateral[0], s4), td.smooth.weight, td.smooth.bias, 1, 1);
  CHECK(scaled_diff(no_deep, proj) <= 1e-6);
  CHECK(max_abs_diff(only_fine, proj) > 0);

  CHECK_THROWS_AS(topdown_fuse({s4, s8}, td), ShapeError);
  CHECK_THROWS_AS(topdown_fuse({s4, s16, s8}, td), ShapeError);
}
