#include "rcnf/binary_io.hpp"

#include <bit>
#include <cstring>

#include "rcnf/errors.hpp"

namespace rcnf::io {
namespace {

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& os, T v) {
  v = to_le(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  if (!os) throw IoError("write failed");
}

template <typename T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) throw IoError("unexpected end of file");
  return to_le(v);
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { put(os, v); }
void write_f64(std::ostream& os, double v) { put(os, v); }

void write_f64s(std::ostream& os, const double* v, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
    if (!os) throw IoError("write failed");
  } else {
    for (std::size_t i = 0; i < n; ++i) put(os, v[i]);
  }
}

void write_bytes(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!os) throw IoError("write failed");
}

std::uint32_t read_u32(std::istream& is) { return get<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return get<std::uint64_t>(is); }
double read_f64(std::istream& is) { return get<double>(is); }

void read_f64s(std::istream& is, double* v, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    const auto want = static_cast<std::streamsize>(n * sizeof(double));
    is.read(reinterpret_cast<char*>(v), want);
    if (is.gcount() != want) throw IoError("unexpected end of file");
  } else {
    for (std::size_t i = 0; i < n; ++i) v[i] = get<double>(is);
  }
}

std::string read_bytes(std::istream& is, std::uint64_t max_len) {
  const std::uint64_t n = read_u64(is);
  if (n > max_len) throw IoError("length prefix out of range");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n)) throw IoError("unexpected end of file");
  return s;
}

void write_magic(std::ostream& os, const char (&magic)[5]) {
  os.write(magic, 4);
  if (!os) throw IoError("write failed");
}

void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what) {
  char got[4] = {0, 0, 0, 0};
  is.read(got, 4);
  if (is.gcount() != 4 || std::memcmp(got, magic, 4) != 0)
    throw IoError(what + ": bad magic, expected " + std::string(magic, 4));
}

}  // namespace rcnf::io
