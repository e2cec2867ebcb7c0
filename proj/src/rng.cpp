#include "dlgnet/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

DLGNET_NAMESPACE_BEGIN

namespace {

std::uint64_t finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t SeededRng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return finalize(state_);
}

double SeededRng::uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("SeededRng::below(0)");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
  std::uint64_t v;
  do v = next_u64();
  while (v >= limit);
  return v % n;
}

double SeededRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> SeededRng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[below(i)]);
  return p;
}

SeededRng SeededRng::fork(std::uint64_t key) const { return SeededRng(mix_seed(seed_, key)); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return finalize(finalize(a + 0x9e3779b97f4a7c15ULL) ^ (b * 0xd1b54a32d192ed03ULL));
}

DLGNET_NAMESPACE_END
