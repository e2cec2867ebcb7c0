#include "dlgnet/window.hpp"

#include <algorithm>
#include <stdexcept>

DLGNET_NAMESPACE_BEGIN

void WindowSpec::validate() const {
  if (k < 1 || k % 2 == 0)
    throw std::invalid_argument("window size k must be a positive odd integer, got " +
                                std::to_string(k));
  if (dilations.empty()) throw std::invalid_argument("at least one dilation rate is required");
  for (std::size_t i = 0; i < dilations.size(); ++i) {
    if (dilations[i] < 1) throw std::invalid_argument("dilation rates must be positive");
    if (i && dilations[i] <= dilations[i - 1])
      throw std::invalid_argument("dilation rates must be strictly increasing");
  }
}

std::string WindowSpec::dilations_string() const {
  std::string s;
  for (std::size_t i = 0; i < dilations.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(dilations[i]);
  }
  return s;
}

std::vector<std::vector<Offset>> surrounding_offsets(const WindowSpec& spec) {
  spec.validate();
  const int r = (spec.k - 1) / 2;
  std::vector<std::vector<Offset>> scales;
  for (int d : spec.dilations) {
    std::vector<Offset> ring;
    for (int i = -r; i <= r; ++i)
      for (int j = -r; j <= r; ++j)
        if (i != 0 || j != 0) ring.push_back({i * d, j * d});
    scales.push_back(std::move(ring));
  }
  return scales;
}

std::vector<Offset> union_offsets(const WindowSpec& spec) {
  std::vector<Offset> all;
  for (const auto& ring : surrounding_offsets(spec))
    for (const auto& o : ring)
      if (std::find(all.begin(), all.end(), o) == all.end()) all.push_back(o);
  return all;
}

NeighborIndex::NeighborIndex(const WindowSpec& spec, std::size_t height, std::size_t width)
    : height_(height), width_(width) {
  if (height == 0 || width == 0) throw std::invalid_argument("empty feature map");
  offsets_.push_back({0, 0});
  for (const auto& o : union_offsets(spec)) offsets_.push_back(o);
  const auto h = static_cast<int>(height), w = static_cast<int>(width);
  table_.resize(locations() * offsets_.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (std::size_t s = 0; s < offsets_.size(); ++s) {
        const int ny = y + offsets_[s].dy, nx = x + offsets_[s].dx;
        const bool inside = ny >= 0 && ny < h && nx >= 0 && nx < w;
        table_[(static_cast<std::size_t>(y) * width + x) * offsets_.size() + s] =
            inside ? ny * w + nx : -1;
      }
}

std::size_t NeighborIndex::valid_slots(std::size_t loc) const {
  std::size_t n = 0;
  for (std::size_t s = 0; s < slots(); ++s) n += valid(loc, s);
  return n;
}

DLGNET_NAMESPACE_END
