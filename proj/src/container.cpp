#include "jtanet/container.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

namespace jtanet {
namespace {

constexpr std::array<char, 8> kMagic = {'J', 'T', 'A', 'N', 'E', 'T', 'C', '\n'};
constexpr std::size_t kPreamble = 8 + 4 + 8;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return static_cast<T>(u);
}

void append_values(std::string& out, const std::vector<double>& v) {
  for (double d : v) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(d));
}

void append_values(std::string& out, const std::vector<std::int32_t>& v) {
  for (std::int32_t i : v) put_le<std::int32_t>(out, i);
}

}  // namespace

Array Array::from_tensor(std::string name, const Tensor& t) {
  return Array{std::move(name), t.shape(), t.storage()};
}

Array Array::from_ints(std::string name, std::vector<std::int32_t> v) {
  Shape shape{v.size()};
  return Array{std::move(name), std::move(shape), std::move(v)};
}

Tensor Array::to_tensor() const {
  const auto* v = std::get_if<std::vector<double>>(&values);
  if (v == nullptr) throw FormatError("array '" + name + "' is not f64");
  return Tensor(shape, *v);
}

const std::vector<std::int32_t>& Array::ints() const {
  const auto* v = std::get_if<std::vector<std::int32_t>>(&values);
  if (v == nullptr) throw FormatError("array '" + name + "' is not i32");
  return *v;
}

const Array& Container::array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw FormatError("container has no array '" + name + "'");
}

bool Container::has_array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

void write_container(const std::filesystem::path& path, const Container& container) {
  std::string payload;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& a : container.arrays) {
    const std::size_t offset = payload.size();
    std::visit([&](const auto& v) { append_values(payload, v); }, a.values);
    const bool is_f64 = std::holds_alternative<std::vector<double>>(a.values);
    manifest.push_back({{"name", a.name},
                        {"dtype", is_f64 ? "f64" : "i32"},
                        {"shape", a.shape},
                        {"offset", offset},
                        {"nbytes", payload.size() - offset}});
  }
  nlohmann::json header = {{"kind", container.kind}, {"meta", container.meta}, {"arrays", manifest}};
  const std::string header_text = header.dump();

  std::string out(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kContainerVersion);
  put_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  out += payload;

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing " + path.string());
}

Container read_container(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < kPreamble || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError(path.string() + ": not a jtanet container");
  }
  const auto version = get_le<std::uint32_t>(raw + 8);
  if (version != kContainerVersion) {
    throw FormatError(path.string() + ": unsupported container version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(raw + 12);
  if (header_len > bytes.size() - kPreamble) throw FormatError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPreamble, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }

  Container c;
  const std::size_t payload_start = kPreamble + header_len;
  const std::size_t payload_size = bytes.size() - payload_start;
  try {
    c.kind = header.at("kind").get<std::string>();
    c.meta = header.at("meta");
    for (const auto& entry : header.at("arrays")) {
      Array a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<Shape>();
      const auto dtype = entry.at("dtype").get<std::string>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto nbytes = entry.at("nbytes").get<std::size_t>();
      const std::size_t count = shape_numel(a.shape);
      const std::size_t width = dtype == "f64" ? 8 : dtype == "i32" ? 4 : 0;
      if (width == 0) throw FormatError(path.string() + ": unknown dtype " + dtype);
      if (nbytes != count * width) throw FormatError(path.string() + ": size mismatch for array " + a.name);
      if (offset > payload_size || nbytes > payload_size - offset) {
        throw FormatError(path.string() + ": truncated payload for array " + a.name);
      }
      const unsigned char* p = raw + payload_start + offset;
      if (width == 8) {
        std::vector<double> v(count);
        for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
        a.values = std::move(v);
      } else {
        std::vector<std::int32_t> v(count);
        for (std::size_t i = 0; i < count; ++i) v[i] = get_le<std::int32_t>(p + 4 * i);
        a.values = std::move(v);
      }
      c.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
  if (!expected_kind.empty() && c.kind != expected_kind) {
    throw FormatError(path.string() + ": expected a " + expected_kind + " container, found " + c.kind);
  }
  return c;
}

std::string fnv1a_hex(const void* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  return fnv1a_hex(bytes.data(), bytes.size());
}

}  // namespace jtanet
