#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "angle_i2p/types.hpp"

namespace angle_i2p::detail {

inline void put_u64(std::ostream& out, std::uint64_t value) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
  out.write(bytes, 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw DomainError("truncated binary stream");
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return value;
}

inline void put_f64(std::ostream& out, double value) {
  put_u64(out, std::bit_cast<std::uint64_t>(value));
}

inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void put_magic(std::ostream& out, const char (&magic)[6]) { out.write(magic, 5); }

inline void expect_magic(std::istream& in, const char (&magic)[6]) {
  char buf[5];
  if (!in.read(buf, 5) || std::memcmp(buf, magic, 5) != 0) {
    throw DomainError(std::string("bad header, expected ") + magic);
  }
}

inline void put_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}

inline Matrix get_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get_f64(in);
  return m;
}

}  // namespace angle_i2p::detail
