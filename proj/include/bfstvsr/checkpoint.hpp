#pragma once

// Binary checkpoint container:
//   "BFSK" | version u32 | entry count u32 |
//   per entry: name length u32, UTF-8 name, rank u32, dims u32 x rank,
//              values f32 x prod(dims)
// All integers and floats little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/param_store.hpp"

namespace bfstvsr {

inline constexpr char kCheckpointMagic[4] = {'B', 'F', 'S', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  std::string out(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::size_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.values.size()) throw CheckpointError("tensor '" + t.name + "' has inconsistent dims");
    detail::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) detail::put_u32(out, d);
    for (float v : t.values) detail::put_f32(out, v);
  }
  return out;
}

inline std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  detail::ByteReader in(bytes);
  in.str(4);
  const auto version = in.u32();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = in.u32();
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = in.str(in.u32());
    const auto rank = in.u32();
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(in.u32());
      n *= t.dims.back();
    }
    t.values.resize(n);
    for (auto& v : t.values) v = in.f32();
    tensors.push_back(std::move(t));
  }
  if (!in.at_end()) throw CheckpointError("trailing bytes after checkpoint entries");
  return tensors;
}

/// Writes to a temporary sibling and renames it over the destination.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  write_file_atomic(path, encode_checkpoint(tensors));
}

inline std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

template <class T>
std::vector<NamedTensor> to_tensors(const ParamStore<T>& store) {
  std::vector<NamedTensor> out;
  out.reserve(store.size());
  for (const auto& e : store.entries()) {
    NamedTensor t{e.name, {}, {}};
    for (auto d : e.shape) t.dims.push_back(static_cast<std::uint32_t>(d));
    t.values.assign(e.value.begin(), e.value.end());
    out.push_back(std::move(t));
  }
  return out;
}

/// Loads values into an already-registered store; every entry must be present
/// with a matching shape. Tensors unknown to the store are ignored.
template <class T>
void from_tensors(const std::vector<NamedTensor>& tensors, ParamStore<T>& store) {
  for (auto& e : store.entries()) {
    const NamedTensor* found = nullptr;
    for (const auto& t : tensors) {
      if (t.name == e.name) {
        found = &t;
        break;
      }
    }
    if (found == nullptr) throw CheckpointError("checkpoint is missing parameter '" + e.name + "'");
    std::vector<std::size_t> shape(found->dims.begin(), found->dims.end());
    if (shape != e.shape) throw CheckpointError("shape mismatch for parameter '" + e.name + "'");
    for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] = static_cast<T>(found->values[i]);
  }
}

}  // namespace bfstvsr
