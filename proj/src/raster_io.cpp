#include "uncerseg/raster_io.hpp"

#include <png.h>
#include <openssl/evp.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace uncerseg {

namespace {

struct ReadCursor {
  const Bytes* data;
  std::size_t offset;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->data->size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, cur->data->data() + cur->offset, length);
  cur->offset += length;
}

void write_to_memory(png_structp png, png_bytep in, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + length);
}

void flush_noop(png_structp) {}

thread_local std::string png_error_message;

// libpng is C: errors longjmp back to the setjmp in the caller, never unwind through it.
[[noreturn]] void on_png_error(png_structp png, png_const_charp msg) {
  png_error_message = msg;
  png_longjmp(png, 1);
}
void on_png_warning(png_structp, png_const_charp) {}

[[noreturn]] void throw_png_error() { throw IoError("png: " + png_error_message); }

// Owns a libpng read or write context.
class PngHandle {
 public:
  explicit PngHandle(bool reading) : reading_(reading) {
    png_ = reading ? png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning)
                   : png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
    if (!png_) throw IoError("png: cannot allocate context");
    info_ = png_create_info_struct(png_);
    if (!info_) {
      release();
      throw IoError("png: cannot allocate info");
    }
  }
  ~PngHandle() { release(); }
  PngHandle(const PngHandle&) = delete;
  PngHandle& operator=(const PngHandle&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  void release() {
    if (reading_) {
      png_destroy_read_struct(&png_, info_ ? &info_ : nullptr, nullptr);
    } else {
      png_destroy_write_struct(&png_, info_ ? &info_ : nullptr);
    }
  }

  bool reading_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

Bytes encode_gray(int width, int height, int bit_depth, const std::vector<std::uint16_t>& values) {
  Bytes out;
  const int bytes_per_sample = bit_depth / 8;
  std::vector<png_byte> row(static_cast<std::size_t>(width) * bytes_per_sample);
  PngHandle h(false);
  if (setjmp(png_jmpbuf(h.png()))) throw_png_error();
  png_set_write_fn(h.png(), &out, write_to_memory, flush_noop);
  png_set_IHDR(h.png(), h.info(), static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(h.png(), h.info());

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::uint16_t v = values[static_cast<std::size_t>(y) * width + x];
      if (bit_depth == 16) {
        // PNG stores samples big-endian.
        row[2 * x] = static_cast<png_byte>(v >> 8);
        row[2 * x + 1] = static_cast<png_byte>(v & 0xff);
      } else {
        row[x] = static_cast<png_byte>(v);
      }
    }
    png_write_row(h.png(), row.data());
  }
  png_write_end(h.png(), nullptr);
  return out;
}

}  // namespace

DecodedPng decode_gray_png(const Bytes& png) {
  if (png.size() < 8 || png_sig_cmp(png.data(), 0, 8) != 0) throw IoError("png: bad signature");
  ReadCursor cursor{&png, 0};
  DecodedPng out;
  std::vector<png_byte> row;
  PngHandle h(true);
  if (setjmp(png_jmpbuf(h.png()))) throw_png_error();
  png_set_read_fn(h.png(), &cursor, read_from_memory);
  png_read_info(h.png(), h.info());

  out.width = static_cast<int>(png_get_image_width(h.png(), h.info()));
  out.height = static_cast<int>(png_get_image_height(h.png(), h.info()));
  out.bit_depth = png_get_bit_depth(h.png(), h.info());
  const int color = png_get_color_type(h.png(), h.info());
  if (color != PNG_COLOR_TYPE_GRAY) png_error(h.png(), "expected single-channel grayscale");
  if (out.bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(h.png());
    out.bit_depth = 8;
  }
  png_read_update_info(h.png(), h.info());

  const std::size_t rowbytes = png_get_rowbytes(h.png(), h.info());
  row.resize(rowbytes);
  out.values.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    png_read_row(h.png(), row.data(), nullptr);
    for (int x = 0; x < out.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * out.width + x;
      out.values[i] = out.bit_depth == 16 ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1])
                                          : row[x];
    }
  }
  png_read_end(h.png(), nullptr);
  return out;
}

std::uint16_t quantize_probability(double p) {
  if (!(p >= 0 && p <= 1)) throw DomainError("quantize_probability: value outside [0, 1]");
  return static_cast<std::uint16_t>(std::floor(p * 65535.0 + 0.5));
}

double dequantize_probability(std::uint16_t v) { return static_cast<double>(v) / 65535.0; }

Bytes encode_gray8_png(const GrayImage& image) {
  std::vector<std::uint16_t> v(image.data(), image.data() + image.size());
  return encode_gray(static_cast<int>(image.cols()), static_cast<int>(image.rows()), 8, v);
}

Bytes encode_binary_png(const BinaryMask& mask) {
  validate_binary(mask);
  std::vector<std::uint16_t> v(static_cast<std::size_t>(mask.size()));
  for (Eigen::Index i = 0; i < mask.size(); ++i) v[i] = mask.data()[i] ? 255 : 0;
  return encode_gray(static_cast<int>(mask.cols()), static_cast<int>(mask.rows()), 8, v);
}

Bytes encode_prob_png(const ProbMask& mask) {
  validate_probabilities(mask);
  std::vector<std::uint16_t> v(static_cast<std::size_t>(mask.size()));
  for (Eigen::Index i = 0; i < mask.size(); ++i) v[i] = quantize_probability(mask.data()[i]);
  return encode_gray(static_cast<int>(mask.cols()), static_cast<int>(mask.rows()), 16, v);
}

GrayImage decode_gray8_png(const Bytes& png) {
  const DecodedPng d = decode_gray_png(png);
  if (d.bit_depth != 8) throw IoError("png: expected 8-bit image");
  GrayImage out(d.height, d.width);
  for (std::size_t i = 0; i < d.values.size(); ++i) out.data()[i] = static_cast<std::uint8_t>(d.values[i]);
  return out;
}

BinaryMask decode_binary_png(const Bytes& png) {
  const DecodedPng d = decode_gray_png(png);
  if (d.bit_depth != 8) throw IoError("png: masks must be 8-bit");
  BinaryMask out(d.height, d.width);
  for (std::size_t i = 0; i < d.values.size(); ++i) out.data()[i] = d.values[i] != 0 ? 1 : 0;
  return out;
}

ProbMask decode_prob_png(const Bytes& png) {
  const DecodedPng d = decode_gray_png(png);
  if (d.bit_depth != 16) throw IoError("png: probability rasters must be 16-bit");
  ProbMask out(d.height, d.width);
  for (std::size_t i = 0; i < d.values.size(); ++i) out.data()[i] = dequantize_probability(d.values[i]);
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return out;
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string base64_encode(const Bytes& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw DomainError("base64: length not a multiple of 4");
  if (text.empty()) return {};
  Bytes out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw DomainError("base64: invalid character");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace uncerseg
