#include "dlgnet/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

DLGNET_NAMESPACE_BEGIN

namespace {

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(std::uint8_t(value >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("truncated container reading ") + what + " at byte " +
                        std::to_string(pos_));
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out{'D', 'L', 'G', 'T'};
  put<std::uint16_t>(out, kContainerVersion);
  put<std::uint8_t>(out, std::uint8_t(t.rank()));
  for (auto d : t.shape()) put<std::uint32_t>(out, std::uint32_t(d));
  if constexpr (sizeof(Real) == 4) {
    put<std::uint8_t>(out, 0);
    for (Real v : t.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else {
    put<std::uint8_t>(out, 1);
    for (Real v : t.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  Reader r(bytes);
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), "DLGT", 4) != 0) throw FormatError("bad container magic at byte 0");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kContainerVersion)
    throw FormatError("unsupported container version " + std::to_string(version));
  const auto rank = r.get<std::uint8_t>("rank");
  if (rank < 1 || rank > 4) throw FormatError("invalid rank " + std::to_string(rank));
  Shape shape;
  for (std::uint8_t i = 0; i < rank; ++i) shape.push_back(r.get<std::uint32_t>("dims"));
  const auto dtype = r.get<std::uint8_t>("dtype");
  std::vector<Real> data(numel(shape));
  if (dtype == 0) {
    for (auto& v : data) v = static_cast<Real>(std::bit_cast<float>(r.get<std::uint32_t>("payload")));
  } else if (dtype == 1) {
    for (auto& v : data) v = static_cast<Real>(std::bit_cast<double>(r.get<std::uint64_t>("payload")));
  } else {
    throw FormatError("unknown dtype " + std::to_string(dtype));
  }
  if (consumed) *consumed = r.pos();
  return Tensor(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& entries) {
  std::vector<std::uint8_t> out;
  put<std::uint32_t>(out, std::uint32_t(entries.size()));
  for (const auto& e : entries) {
    put<std::uint32_t>(out, std::uint32_t(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    const auto body = encode_tensor(e.value);
    put<std::uint64_t>(out, body.size());
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto count = r.get<std::uint32_t>("entry count");
  std::vector<NamedTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>("name length");
    auto name = r.take(len, "name");
    const auto body_len = r.get<std::uint64_t>("container length");
    auto body = r.take(body_len, "container");
    std::size_t used = 0;
    Tensor t = decode_tensor(body, &used);
    if (used != body_len) throw FormatError("container length mismatch for entry " + std::to_string(i));
    entries.push_back({std::string(name.begin(), name.end()), std::move(t)});
  }
  return entries;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

DLGNET_NAMESPACE_END
