#pragma once

// Binary container shared by checkpoints, feature databases and patch sets.
//
// Layout (all integers little-endian):
//   bytes 0..7   magic "JTANETC\n"
//   bytes 8..11  u32 format version (1)
//   bytes 12..19 u64 header length H
//   H bytes      UTF-8 JSON header:
//                  {"kind": str, "meta": {...},
//                   "arrays": [{"name", "dtype": "f64"|"i32", "shape": [...],
//                               "offset", "nbytes"}, ...]}
//   payload      arrays back to back; offsets are relative to the payload start.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "jtanet/tensor.hpp"

namespace jtanet {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, truncated or mismatched container contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kContainerVersion = 1;

struct Array {
  std::string name;
  Shape shape;
  std::variant<std::vector<double>, std::vector<std::int32_t>> values;

  static Array from_tensor(std::string name, const Tensor& t);
  static Array from_ints(std::string name, std::vector<std::int32_t> v);
  Tensor to_tensor() const;
  const std::vector<std::int32_t>& ints() const;
};

struct Container {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<Array> arrays;

  const Array& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& container);
/// Throws IoError when unreadable, FormatError on any structural problem or
/// when `expected_kind` is non-empty and does not match.
Container read_container(const std::filesystem::path& path, const std::string& expected_kind = "");

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const void* data, std::size_t size);
std::string file_hash(const std::filesystem::path& path);

}  // namespace jtanet
