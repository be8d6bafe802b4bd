// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef PROSFDA_COMMON_HPP
#define PROSFDA_COMMON_HPP

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace prosfda {

// Rejected-input errors: the caller handed us something structurally wrong.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Rejected-input errors: shapes fine, values out of the documented domain.
class ValueError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad experiment configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary file parsing failures, one class per documented failure mode.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BadMagicError : public ParseError {
 public:
  using ParseError::ParseError;
};

class TruncatedFileError : public ParseError {
 public:
  using ParseError::ParseError;
};

class DimOverflowError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Little-endian binary primitives shared by the tensor and model formats.
namespace io {

inline void write_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  __builtin_memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline bool read_exact(std::istream& is, unsigned char* dst, std::size_t n) {
  is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(is.gcount()) == n;
}

inline std::uint16_t read_u16(std::istream& is, const std::string& what) {
  unsigned char b[2];
  if (!read_exact(is, b, 2)) throw TruncatedFileError("truncated file while reading " + what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!read_exact(is, b, 4)) throw TruncatedFileError("truncated file while reading " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline float read_f32(std::istream& is, const std::string& what) {
  std::uint32_t bits = read_u32(is, what);
  float v;
  __builtin_memcpy(&v, &bits, 4);
  return v;
}

}  // namespace io
}  // namespace prosfda

#endif  // PROSFDA_COMMON_HPP
