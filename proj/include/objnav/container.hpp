#pragma once
// Shared binary container for checkpoints, scenes, map snapshots and
// distance-field dumps. Layout:
//   "ODRQ" | version u16 LE | records until EOF
//   record: name_len u32 | name bytes | rank u32 | extents u32[rank] |
//           f32 LE values, row-major
// Values are stored as 32-bit floats regardless of the in-memory precision.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "objnav/tensor.hpp"

namespace objnav {

constexpr std::uint16_t kContainerVersion = 1;

namespace detail {

inline void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {(unsigned char)(v & 0xff), (unsigned char)(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& os, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(os, v);
}

inline bool get_u16(std::istream& is, std::uint16_t& v) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) return false;
  v = std::uint16_t(b[0] | (b[1] << 8));
  return true;
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return true;
}

inline bool get_f32(std::istream& is, float& f) {
  std::uint32_t v;
  if (!get_u32(is, v)) return false;
  std::memcpy(&f, &v, 4);
  return true;
}

}  // namespace detail

inline void save_tensors(const std::string& path,
                         const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("ODRQ", 4);
  detail::put_u16(os, kContainerVersion);
  for (const auto& [name, t] : tensors) {
    detail::put_u32(os, std::uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    detail::put_u32(os, std::uint32_t(t->rank()));
    for (int d = 0; d < t->rank(); ++d) detail::put_u32(os, std::uint32_t(t->extent(d)));
    for (std::size_t i = 0; i < t->size(); ++i) detail::put_f32(os, float((*t)[i]));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "ODRQ", 4) != 0)
    throw std::runtime_error("bad container magic in " + path);
  std::uint16_t version;
  if (!detail::get_u16(is, version) || version != kContainerVersion)
    throw std::runtime_error("unsupported container version in " + path);
  std::vector<std::pair<std::string, Tensor>> out;
  for (;;) {
    std::uint32_t name_len;
    if (!detail::get_u32(is, name_len)) break;  // clean EOF
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw std::runtime_error("truncated record name in " + path);
    std::uint32_t rank;
    if (!detail::get_u32(is, rank))
      throw std::runtime_error("truncated record rank in " + path);
    std::vector<int> shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      std::uint32_t e;
      if (!detail::get_u32(is, e))
        throw std::runtime_error("truncated record extents in " + path);
      shape[d] = int(e);
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
      float f;
      if (!detail::get_f32(is, f))
        throw std::runtime_error("truncated record data in " + path);
      t[i] = double(f);
    }
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace objnav
