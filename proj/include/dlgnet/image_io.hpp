#pragma once

#include "dlgnet/namespace.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "dlgnet/tensor.hpp"

DLGNET_NAMESPACE_BEGIN

/// Malformed image file; offset() is the byte where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// 8-bit raster, interleaved channels (1 = gray, 3 = RGB).
struct Image8 {
  std::size_t width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> pixels;
};

/// Parses binary P5 (gray) or P6 (RGB) with maxval 255; '#' comments allowed in the header.
Image8 parse_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Image8& image);

/// [C,H,W] tensor in [0,1] -> 8-bit, round-to-nearest with clamping.
Image8 quantize(const Tensor& chw);
/// 8-bit -> [C,H,W] tensor with values v/255.
Tensor dequantize(const Image8& image);

void write_ppm(const std::filesystem::path& path, const Tensor& rgb);
void write_pgm(const std::filesystem::path& path, const Tensor& gray);
/// Reads P5 or P6 into [C,H,W].
Tensor read_pnm(const std::filesystem::path& path);

DLGNET_NAMESPACE_END
