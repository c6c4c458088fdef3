#pragma once

// PNG codecs shared by the file formats and the segmenter wire protocol.
//
//   BinaryMask      8-bit gray, 0 -> 0, 1 -> 255
//   GrayImage       8-bit gray, verbatim
//   ProbMask/UMap   16-bit gray, v = floor(p * 65535 + 0.5), p = v / 65535

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uncerseg/raster.hpp"

namespace uncerseg {

using Bytes = std::vector<std::uint8_t>;

/// A decoded grayscale PNG before interpretation.
struct DecodedPng {
  int width = 0;
  int height = 0;
  int bit_depth = 0;                 // 8 or 16
  std::vector<std::uint16_t> values;  // row-major samples
};

/// Decodes a single-channel PNG (8- or 16-bit); anything else is an IoError.
DecodedPng decode_gray_png(const Bytes& png);

Bytes encode_gray8_png(const GrayImage& image);
Bytes encode_binary_png(const BinaryMask& mask);
Bytes encode_prob_png(const ProbMask& mask);

GrayImage decode_gray8_png(const Bytes& png);
/// Any nonzero sample becomes 1; rejects 16-bit input.
BinaryMask decode_binary_png(const Bytes& png);
ProbMask decode_prob_png(const Bytes& png);

std::uint16_t quantize_probability(double p);
double dequantize_probability(std::uint16_t v);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Bytes& bytes);

inline GrayImage read_gray8(const std::filesystem::path& p) { return decode_gray8_png(read_file(p)); }
inline BinaryMask read_binary(const std::filesystem::path& p) { return decode_binary_png(read_file(p)); }
inline ProbMask read_prob(const std::filesystem::path& p) { return decode_prob_png(read_file(p)); }
inline void write_gray8(const std::filesystem::path& p, const GrayImage& m) { write_file(p, encode_gray8_png(m)); }
inline void write_binary(const std::filesystem::path& p, const BinaryMask& m) { write_file(p, encode_binary_png(m)); }
inline void write_prob(const std::filesystem::path& p, const ProbMask& m) { write_file(p, encode_prob_png(m)); }

std::string base64_encode(const Bytes& bytes);
/// Throws DomainError on malformed input.
Bytes base64_decode(const std::string& text);

}  // namespace uncerseg
