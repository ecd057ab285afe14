#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace rcnf::io {

// Little-endian primitives. Readers throw IoError on truncation.

void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
void write_f64s(std::ostream& os, const double* v, std::size_t n);
void write_bytes(std::ostream& os, const std::string& s);  // u64 length prefix

std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);
void read_f64s(std::istream& is, double* v, std::size_t n);
std::string read_bytes(std::istream& is, std::uint64_t max_len = (1ULL << 34));

void write_magic(std::ostream& os, const char (&magic)[5]);
/// Throws IoError naming `what` if the next four bytes differ from magic.
void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what);

}  // namespace rcnf::io
