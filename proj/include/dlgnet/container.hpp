#pragma once

#include "dlgnet/namespace.hpp"

// Binary tensor container:
//   "DLGT" | version u16 | rank u8 | dims u32[rank] | dtype u8 | payload
// All integers and values little-endian. dtype 0 = f32, 1 = f64.
// A checkpoint is u32 count followed by count entries of
//   name_len u32 | name bytes | container_len u64 | container bytes.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlgnet/tensor.hpp"

DLGNET_NAMESPACE_BEGIN

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kContainerVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
/// Decodes one container; `consumed` receives the number of bytes read.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

struct NamedTensor {
  std::string name;
  Tensor value;
};

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

DLGNET_NAMESPACE_END
