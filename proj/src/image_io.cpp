#include "dlgnet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "dlgnet/container.hpp"

DLGNET_NAMESPACE_BEGIN

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " (byte " + std::to_string(offset) + ")"), offset_(offset) {}

namespace {

class HeaderCursor {
 public:
  explicit HeaderCursor(std::span<const std::uint8_t> b) : bytes_(b) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1u << 24)) throw ParseError(std::string(what) + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("expected ") + what, start);
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image8 parse_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ParseError("bad magic, expected P5 or P6", 0);
  Image8 img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  HeaderCursor cur(bytes.subspan(2));
  img.width = cur.number("width");
  img.height = cur.number("height");
  const std::size_t maxval_at = cur.pos() + 2;
  const std::size_t maxval = cur.number("maxval");
  if (maxval != 255) throw ParseError("only maxval 255 is supported", maxval_at);
  if (img.width == 0 || img.height == 0) throw ParseError("zero image extent", 2);
  // Exactly one whitespace byte separates the header from the raster.
  const std::size_t sep = cur.pos() + 2;
  if (sep >= bytes.size() || !std::isspace(bytes[sep]))
    throw ParseError("missing whitespace after header", sep);
  const std::size_t start = sep + 1;
  const std::size_t need = img.width * img.height * img.channels;
  if (bytes.size() - start < need)
    throw ParseError("truncated raster: need " + std::to_string(need) + " bytes, have " +
                         std::to_string(bytes.size() - start),
                     bytes.size());
  img.pixels.assign(bytes.begin() + std::ptrdiff_t(start),
                    bytes.begin() + std::ptrdiff_t(start + need));
  return img;
}

std::vector<std::uint8_t> encode_pnm(const Image8& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("PNM supports 1 or 3 channels");
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(image.width) + " " + std::to_string(image.height) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

Image8 quantize(const Tensor& chw) {
  if (chw.rank() != 3) throw ShapeError("quantize expects [C,H,W], got " + to_string(chw.shape()));
  Image8 img;
  img.channels = chw.dim(0);
  img.height = chw.dim(1);
  img.width = chw.dim(2);
  img.pixels.resize(chw.size());
  auto v = chw.data();
  const std::size_t plane = img.width * img.height;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      const double x = std::clamp(double(v[c * plane + p]), 0.0, 1.0);
      img.pixels[p * img.channels + c] = static_cast<std::uint8_t>(std::lround(x * 255.0));
    }
  return img;
}

Tensor dequantize(const Image8& image) {
  const std::size_t plane = image.width * image.height;
  std::vector<Real> data(plane * image.channels);
  for (std::size_t c = 0; c < image.channels; ++c)
    for (std::size_t p = 0; p < plane; ++p)
      data[c * plane + p] = static_cast<Real>(image.pixels[p * image.channels + c] / 255.0);
  return Tensor({image.channels, image.height, image.width}, std::move(data));
}

void write_ppm(const std::filesystem::path& path, const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ShapeError("write_ppm expects [3,H,W]");
  write_bytes(path, encode_pnm(quantize(rgb)));
}

void write_pgm(const std::filesystem::path& path, const Tensor& gray) {
  if (gray.rank() != 3 || gray.dim(0) != 1) throw ShapeError("write_pgm expects [1,H,W]");
  write_bytes(path, encode_pnm(quantize(gray)));
}

Tensor read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return dequantize(parse_pnm(bytes));
}

DLGNET_NAMESPACE_END
