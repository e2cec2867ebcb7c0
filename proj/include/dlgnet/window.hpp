#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

DLGNET_NAMESPACE_BEGIN

/// k x k sampling window evaluated at one or more dilation rates.
struct WindowSpec {
  int k = 3;
  std::vector<int> dilations{1, 3};

  /// Throws std::invalid_argument on even/non-positive k or non-increasing dilations.
  void validate() const;
  std::string dilations_string() const;  // "1;3"
};

struct Offset {
  int dy = 0;
  int dx = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Surrounding area per dilation: {(i*d, j*d) : |i|,|j| <= (k-1)/2} without the center.
std::vector<std::vector<Offset>> surrounding_offsets(const WindowSpec& spec);

/// Union of all scales' offsets, deduplicated, first-seen order.
std::vector<Offset> union_offsets(const WindowSpec& spec);

/// Precomputed graph topology for an H x W feature map. Slot 0 is the center
/// location; slots 1..K are the union of the multiscale surrounding offsets.
/// Out-of-bounds neighbors are stored as -1 and are never part of a softmax.
class NeighborIndex {
 public:
  NeighborIndex(const WindowSpec& spec, std::size_t height, std::size_t width);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t locations() const { return height_ * width_; }
  std::size_t slots() const { return offsets_.size(); }
  std::span<const Offset> offsets() const { return offsets_; }

  /// Linear neighbor location for (loc, slot) or -1 when it leaves the map.
  std::int32_t neighbor(std::size_t loc, std::size_t slot) const {
    return table_[loc * offsets_.size() + slot];
  }
  bool valid(std::size_t loc, std::size_t slot) const { return neighbor(loc, slot) >= 0; }
  std::size_t valid_slots(std::size_t loc) const;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<Offset> offsets_;
  std::vector<std::int32_t> table_;
};

DLGNET_NAMESPACE_END
