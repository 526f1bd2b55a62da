#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "tlab/error.hpp"

// Little-endian primitives for the checkpoint and dataset formats.
namespace tlab::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
inline void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_f64s(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}
inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void get_raw(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw Error(ErrorCode::kCorruptFile, "unexpected end of file");
}
inline std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v;
  get_raw(in, &v, 4);
  return v;
}
inline std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v;
  get_raw(in, &v, 8);
  return v;
}
inline double get_f64(std::istream& in) {
  double v;
  get_raw(in, &v, 8);
  return v;
}
inline void get_f64s(std::istream& in, std::vector<double>& v) { get_raw(in, v.data(), v.size() * 8); }
inline std::string get_string(std::istream& in, std::size_t max_len = 1 << 20) {
  const std::uint32_t n = get_u32(in);
  if (n > max_len) throw Error(ErrorCode::kCorruptFile, "string length out of range");
  std::string s(n, '\0');
  get_raw(in, s.data(), n);
  return s;
}

// FNV-1a, used for config hashes.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tlab::binary
