#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dlgnet/container.hpp"
#include "dlgnet/kernels.hpp"
#include "dlgnet/ops.hpp"
#include "dlgnet/optim.hpp"
#include "dlgnet/params.hpp"

using namespace dlg;

namespace {

Tensor random_tensor(Shape shape, SeededRng& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (Real& v : t.data()) v = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

double max_abs_diff(std::span<const Real> a, std::span<const Real> b) {
  REQUIRE(a.size() == b.size());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

// Six nested loops over (n, co, oy, ox, ci, tap), written independently of the kernels.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                               std::size_t pad) {
  const long N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long O = w.dim(0), K = w.dim(2), L = w.dim(3);
  const long OH = (H + 2 * long(pad) - K) / long(stride) + 1;
  const long OW = (W + 2 * long(pad) - L) / long(stride) + 1;
  std::vector<double> y(N * O * OH * OW);
  auto xv = x.data();
  auto wv = w.data();
  for (long n = 0; n < N; ++n)
    for (long o = 0; o < O; ++o)
      for (long i = 0; i < OH; ++i)
        for (long j = 0; j < OW; ++j) {
          double s = b.defined() ? b.data()[o] : 0.0;
          for (long c = 0; c < C; ++c)
            for (long p = 0; p < K * L; ++p) {
              const long yy = i * long(stride) + p / L - long(pad);
              const long xx = j * long(stride) + p % L - long(pad);
              if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
              s += double(xv[((n * C + c) * H + yy) * W + xx]) * double(wv[((o * C + c) * K + p / L) * L + p % L]);
            }
          y[((n * O + o) * OH + i) * OW + j] = s;
        }
  return y;
}

}  // namespace

TEST_CASE("tensor invariants") {
  const Tensor t({2, 3, 4}, Real(1.5));
  CHECK(t.size() == 24);
  CHECK(numel(t.shape()) == t.data().size());
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<Real>(3)), ShapeError);
  Tensor g({3}, Real(0), true);
  CHECK(g.grad().size() == 3);
  const Tensor copy = g;
  const Tensor deep = g.clone();
  g.data()[0] = 5;
  CHECK(copy.data()[0] == 5);
  CHECK(deep.data()[0] == 0);
}

TEST_CASE("conv2d examples") {
  SUBCASE("1x1 identity kernel") {
    SeededRng rng(1);
    const Tensor x = random_tensor({2, 3, 4, 5}, rng);
    Tensor w({3, 3, 1, 1});
    for (std::size_t c = 0; c < 3; ++c) w.data()[c * 3 + c] = 1;
    const Tensor y = conv2d(x, w, Tensor::zeros({3}));
    CHECK(max_abs_diff(y.data(), x.data()) == 0);
  }
  SUBCASE("3x3 ones on a constant image") {
    const Tensor x = Tensor::full({1, 1, 5, 5}, 1);
    const Tensor y = conv2d(x, Tensor::full({1, 1, 3, 3}, 1), Tensor(), 1, 1);
    CHECK(y.data()[2 * 5 + 2] == 9);
    CHECK(y.data()[0] == 4);
  }
  SUBCASE("random instance against six loops") {
    SeededRng rng(2);
    const Tensor x = random_tensor({2, 1, 4, 4}, rng);
    const Tensor w = random_tensor({3, 1, 3, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    const auto ref = naive_conv(x, w, b, 1, 1);
    const Tensor y = conv2d(x, w, b, 1, 1);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(double(y.data()[i]) == doctest::Approx(ref[i]).epsilon(1e-6));
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(conv2d(Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor()), ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor({1, 2, 4, 4}), Tensor({1, 2, 2, 2}), Tensor()), ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor({2, 4, 4}), Tensor({1, 2, 3, 3}), Tensor()), ShapeError);
  }
}

TEST_CASE("conv2d matches the naive loops on 100 random shapes") {
  SeededRng rng(3);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(4), ci = 1 + rng.below(8), co = 1 + rng.below(8);
    const std::size_t k = rng.coin() ? 3 : 1;
    const std::size_t h = k + rng.below(17 - k), w = k + rng.below(17 - k);
    const std::size_t stride = 1 + rng.below(2), pad = rng.below(k / 2 + 1);
    const Tensor x = random_tensor({n, ci, h, w}, rng);
    const Tensor wt = random_tensor({co, ci, k, k}, rng);
    const Tensor b = random_tensor({co}, rng);
    const auto ref = naive_conv(x, wt, b, stride, pad);
    const Tensor y = conv2d(x, wt, b, stride, pad);
    REQUIRE(y.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(double(y.data()[i]) - ref[i]));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("serial and parallel kernels agree") {
  SeededRng rng(4);
  const int saved = kernels::max_threads();
  kernels::set_threads(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(3), ci = 1 + rng.below(6), co = 1 + rng.below(6);
    const std::size_t k = rng.coin() ? 3 : 1, h = 3 + rng.below(12), w = 3 + rng.below(12);
    const std::size_t stride = 1 + rng.below(2), pad = k / 2;
    const Tensor x = random_tensor({n, ci, h, w}, rng), wt = random_tensor({co, ci, k, k}, rng);
    const Tensor b = random_tensor({co}, rng);
    const auto g = kernels::conv_geometry(x.shape(), wt.shape(), stride, pad);
    std::vector<Real> ys(g.batch * g.out_channels * g.out_h * g.out_w), yp(ys.size());
    kernels::serial::conv2d_forward(g, x.data(), wt.data(), b.data(), ys);
    kernels::parallel::conv2d_forward(g, x.data(), wt.data(), b.data(), yp);
    CHECK(max_abs_diff(ys, yp) <= 1e-5);

    const Tensor dy = random_tensor({g.batch, g.out_channels, g.out_h, g.out_w}, rng);
    std::vector<Real> dxs(x.size()), dws(wt.size()), dbs(co), dxp(x.size()), dwp(wt.size()), dbp(co);
    kernels::serial::conv2d_backward(g, x.data(), wt.data(), dy.data(), dxs, dws, dbs);
    kernels::parallel::conv2d_backward(g, x.data(), wt.data(), dy.data(), dxp, dwp, dbp);
    CHECK(max_abs_diff(dxs, dxp) <= 1e-4);
    CHECK(max_abs_diff(dws, dwp) <= 1e-4);
    CHECK(max_abs_diff(dbs, dbp) <= 1e-4);
  }

  for (int trial = 0; trial < 10; ++trial) {
    const WindowSpec spec{3, trial % 2 ? std::vector<int>{1, 3} : std::vector<int>{1}};
    const std::size_t n = 1 + rng.below(4), h = 2 + rng.below(9), w = 2 + rng.below(9);
    const std::size_t cq = 1 + rng.below(5), cv = 1 + rng.below(5);
    const NeighborIndex index(spec, h, w);
    const kernels::AttentionGeometry g{n, cq, cv};
    const std::size_t locs = h * w, slots = index.slots();
    const Tensor q = random_tensor({n * locs * cq}, rng), k = random_tensor({n * locs * cq}, rng);
    const Tensor v = random_tensor({n * locs * cv}, rng), dout = random_tensor({n * locs * cv}, rng);
    std::vector<Real> os(n * locs * cv), op(os.size()), as(locs * n * slots * n), ap(as.size());
    kernels::serial::focal_attention_forward(g, index, q.data(), k.data(), v.data(), os, as);
    kernels::parallel::focal_attention_forward(g, index, q.data(), k.data(), v.data(), op, ap);
    CHECK(max_abs_diff(os, op) <= 1e-5);
    CHECK(max_abs_diff(as, ap) <= 1e-6);
    std::vector<Real> dqs(q.size()), dks(k.size()), dvs(v.size()), dqp(q.size()), dkp(k.size()), dvp(v.size());
    kernels::serial::focal_attention_backward(g, index, q.data(), k.data(), v.data(), as, dout.data(), dqs, dks, dvs);
    kernels::parallel::focal_attention_backward(g, index, q.data(), k.data(), v.data(), ap, dout.data(), dqp, dkp, dvp);
    CHECK(max_abs_diff(dqs, dqp) <= 1e-4);
    CHECK(max_abs_diff(dks, dkp) <= 1e-4);
    CHECK(max_abs_diff(dvs, dvp) <= 1e-4);

    const kernels::AttentionGeometry ga{n, 1, cv};
    const Tensor ts = random_tensor({n * locs}, rng), gs = random_tensor({locs}, rng);
    const Tensor gv = random_tensor({locs * cv}, rng);
    std::vector<Real> gos(n * locs * cv), gop(gos.size()), gas(locs * n * slots), gap(gas.size());
    kernels::serial::guidance_attention_forward(ga, index, ts.data(), gs.data(), gv.data(), gos, gas);
    kernels::parallel::guidance_attention_forward(ga, index, ts.data(), gs.data(), gv.data(), gop, gap);
    CHECK(max_abs_diff(gos, gop) <= 1e-5);
    CHECK(max_abs_diff(gas, gap) <= 1e-6);
    std::vector<Real> dts(ts.size()), dgs(gs.size()), dgv(gv.size()), dtp(ts.size()), dgp(gs.size()), dgvp(gv.size());
    kernels::serial::guidance_attention_backward(ga, index, gv.data(), gas, dout.data(), dts, dgs, dgv);
    kernels::parallel::guidance_attention_backward(ga, index, gv.data(), gap, dout.data(), dtp, dgp, dgvp);
    CHECK(max_abs_diff(dts, dtp) <= 1e-4);
    CHECK(max_abs_diff(dgs, dgp) <= 1e-4);
    CHECK(max_abs_diff(dgv, dgvp) <= 1e-4);
  }
  kernels::set_threads(saved);
}

TEST_CASE("parallel results do not depend on the thread count") {
  SeededRng rng(5);
  const Tensor x = random_tensor({2, 5, 13, 11}, rng), w = random_tensor({7, 5, 3, 3}, rng);
  const int saved = kernels::max_threads();
  kernels::set_threads(1);
  const Tensor one = conv2d(x, w, Tensor(), 1, 1);
  kernels::set_threads(3);
  const Tensor three = conv2d(x, w, Tensor(), 1, 1);
  kernels::set_threads(saved);
  CHECK(max_abs_diff(one.data(), three.data()) == 0);
}

TEST_CASE("softmax examples and normalization") {
  const Tensor eq = softmax(Tensor::full({4}, 3), 0);
  for (Real v : eq.data()) CHECK(v == doctest::Approx(0.25));
  const Tensor single = softmax(Tensor::of({3, 1}, {-5, 0, 7}), 1);
  for (Real v : single.data()) CHECK(v == 1);
  const Tensor two = softmax(Tensor::of({2}, {0, Real(std::log(3.0))}), 0);
  CHECK(two.data()[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(two.data()[1] == doctest::Approx(0.75).epsilon(1e-6));
  CHECK_THROWS(softmax(Tensor({2, 0}), 1));

  SeededRng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const double scale = trial % 2 ? 1e4 : 1.0;
    const Tensor x = random_tensor({3, 5, 4}, rng, -scale, scale);
    const std::size_t axis = rng.below(3);
    const Tensor y = softmax(x, axis);
    CHECK_FALSE(y.has_nonfinite());
    const auto& s = y.shape();
    std::size_t inner = 1;
    for (std::size_t a = axis + 1; a < 3; ++a) inner *= s[a];
    const std::size_t outer = y.size() / (inner * s[axis]);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        double total = 0;
        for (std::size_t k = 0; k < s[axis]; ++k) {
          const Real v = y.data()[(o * s[axis] + k) * inner + i];
          CHECK(v >= 0);
          total += v;
        }
        CHECK(std::abs(total - 1) <= 1e-6);
      }
  }
}

TEST_CASE("bilinear resize") {
  SeededRng rng(7);
  const Tensor x = random_tensor({2, 3, 5, 4}, rng);
  CHECK(max_abs_diff(bilinear_resize(x, 5, 4).data(), x.data()) == 0);
  const Tensor c = bilinear_resize(Tensor::full({1, 2, 3, 3}, Real(0.7)), 8, 5);
  for (Real v : c.data()) CHECK(v == doctest::Approx(0.7).epsilon(1e-6));
  // Half-pixel centres: source rows/cols 0, 0.25, 0.75, 1 after clamping.
  const Tensor up = bilinear_resize(Tensor::of({1, 1, 2, 2}, {0, 1, 2, 3}), 4, 4);
  const std::vector<Real> expected{0,   0.25, 0.75, 1,    0.5, 0.75, 1.25, 1.5,
                                   1.5, 1.75, 2.25, 2.5,  2,   2.25, 2.75, 3};
  CHECK(max_abs_diff(up.data(), expected) <= 1e-6);
}

TEST_CASE("backward") {
  Tensor p = Tensor::of({2}, {1, 2});
  p.set_requires_grad(true);
  sum(p).backward();
  CHECK(p.grad()[0] == 1);
  CHECK(p.grad()[1] == 1);
  p.zero_grad();
  scale(sum(mul(p, p)), Real(0.5)).backward();
  CHECK(p.grad()[0] == 1);
  CHECK(p.grad()[1] == 2);
  CHECK_THROWS_AS(mul(p, p).backward(), ShapeError);
  {
    NoGradGuard guard;
    CHECK_FALSE(mul(p, p).requires_grad());
  }
}

TEST_CASE("max pool and nearest resize") {
  const Tensor x = Tensor::of({1, 1, 2, 4}, {1, 5, 2, 0, 3, -1, 7, 7});
  const Tensor y = max_pool2x2(x);
  CHECK(y.data()[0] == 5);
  CHECK(y.data()[1] == 7);
  CHECK_THROWS_AS(max_pool2x2(Tensor({1, 1, 3, 4})), ShapeError);
  const Tensor n = nearest_resize(Tensor::of({1, 1, 2, 2}, {0, 1, 1, 0}), 4, 4);
  CHECK(n.data()[0] == 0);
  CHECK(n.data()[3] == 1);
  CHECK(n.data()[15] == 0);
}

TEST_CASE("binary cross-entropy values") {
  const Tensor half = Tensor::full({1, 1, 3, 3}, Real(0.5));
  Tensor gt({1, 1, 3, 3});
  gt.data()[4] = 1;
  CHECK(double(bce_loss(half, gt).item()) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(bce_loss(gt, gt).item() <= 1e-6);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves the parameter unchanged") {
    std::vector<Real> p{1.5}, g{0}, m{0}, v{0};
    adam_update(p, g, m, v, 0.1, {}, 1);
    CHECK(p[0] == Real(1.5));
  }
  SUBCASE("first bias-corrected step") {
    std::vector<Real> p{0}, g{1}, m{0}, v{0};
    adam_update(p, g, m, v, 0.1, {}, 1);
    CHECK(double(p[0]) == doctest::Approx(-0.1 / (1 + 1e-8)).epsilon(1e-6));
  }
  SUBCASE("ten steps on p^2 shrink |p|") {
    std::vector<Real> p{1}, m{0}, v{0};
    double last = 1;
    for (std::uint64_t s = 1; s <= 10; ++s) {
      std::vector<Real> g{2 * p[0]};
      adam_update(p, g, m, v, 0.05, {}, s);
      CHECK(std::abs(double(p[0])) < last);
      last = std::abs(double(p[0]));
    }
  }
  SUBCASE("optimizer over a store") {
    ParameterStore store;
    Tensor w = store.add("w", {2});
    w.data()[0] = 1;
    sum(mul(w, w)).backward();
    Adam adam;
    adam.step(store, 0.01);
    CHECK(adam.steps() == 1);
    CHECK(double(w.data()[0]) == doctest::Approx(0.99).epsilon(1e-5));
    CHECK(w.data()[1] == 0);
  }
}

TEST_CASE("seeded rng") {
  SeededRng a(42), b(42), c(43);
  std::vector<std::uint64_t> xs, ys;
  for (int i = 0; i < 100; ++i) {
    xs.push_back(a.next_u64());
    ys.push_back(b.next_u64());
  }
  CHECK(xs == ys);
  CHECK(c.next_u64() != xs[0]);
  // SplitMix64 reference values for seed 0.
  SeededRng z(0);
  CHECK(z.next_u64() == 0xe220a8397b1dcdafull);
  CHECK(z.next_u64() == 0x6e789e6aa1b965f4ull);
  SeededRng r(9);
  const auto perm = r.permutation(20);
  std::vector<bool> seen(20);
  for (auto i : perm) seen[i] = true;
  CHECK(std::count(seen.begin(), seen.end(), true) == 20);
  SeededRng f1(5), f2(5);
  const Tensor t1 = random_tensor({50}, f1), t2 = random_tensor({50}, f2);
  CHECK(max_abs_diff(t1.data(), t2.data()) == 0);
}

TEST_CASE("tensor container") {
  SeededRng rng(8);
  const Tensor t = random_tensor({2, 3, 4}, rng);
  const auto bytes = encode_tensor(t);
  CHECK(bytes[0] == 'D');
  CHECK(bytes[3] == 'T');
  std::size_t used = 0;
  const Tensor back = decode_tensor(bytes, &used);
  CHECK(used == bytes.size());
  CHECK(back.shape() == t.shape());
  CHECK(max_abs_diff(back.data(), t.data()) == 0);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_tensor(bad), FormatError);
  CHECK_THROWS_AS(decode_tensor(std::span(bytes).first(bytes.size() - 1)), FormatError);

  const std::vector<NamedTensor> entries{{"a.weight", t}, {"b", Tensor::of({1}, {3})}};
  const auto ckpt = encode_checkpoint(entries);
  const auto decoded = decode_checkpoint(ckpt);
  REQUIRE(decoded.size() == 2);
  CHECK(decoded[0].name == "a.weight");
  CHECK(encode_checkpoint(decoded) == ckpt);
}
