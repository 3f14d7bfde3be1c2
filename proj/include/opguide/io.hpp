#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "opguide/core.hpp"

namespace opguide {

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Round-half-up quantization of a clamped intensity to [0, maxval]. NaN maps to 0.
inline std::uint32_t quantize(double v, std::uint32_t maxval) {
  if (std::isnan(v)) return 0;
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint32_t>(std::floor(c * maxval + 0.5));
}

namespace detail {

inline std::string lower_extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Netpbm header token; skips whitespace and '#' comments.
inline std::string pnm_token(const std::vector<unsigned char>& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok += static_cast<char>(buf[pos++]);
  if (tok.empty()) throw ImageFormatError("malformed PNM header: unexpected end of file");
  return tok;
}

inline std::size_t pnm_number(const std::vector<unsigned char>& buf, std::size_t& pos, const char* field) {
  const std::string tok = pnm_token(buf, pos);
  if (!std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw ImageFormatError(std::string("malformed PNM header: bad ") + field + " '" + tok + "'");
  return std::stoul(tok);
}

inline Image decode_pnm(const std::vector<unsigned char>& buf) {
  std::size_t pos = 0;
  const std::string magic = pnm_token(buf, pos);
  std::size_t channels;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else throw ImageFormatError("unsupported PNM variant '" + magic + "' (expected P5 or P6)");
  const std::size_t w = pnm_number(buf, pos, "width");
  const std::size_t h = pnm_number(buf, pos, "height");
  const std::size_t maxval = pnm_number(buf, pos, "maxval");
  if (w == 0 || h == 0) throw ImageFormatError("malformed PNM header: zero dimension");
  if (maxval == 0 || maxval > 65535) throw ImageFormatError("unsupported PNM bit depth (maxval " + std::to_string(maxval) + ")");
  if (pos >= buf.size() || !std::isspace(buf[pos])) throw ImageFormatError("malformed PNM header");
  ++pos;

  const std::size_t bytes = maxval > 255 ? 2 : 1;
  const std::size_t count = w * h * channels;
  if (buf.size() - pos < count * bytes) throw ImageFormatError("truncated PNM raster");
  Image img(w, h, channels);
  const double peak = static_cast<double>(maxval);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t v = buf[pos + i * bytes];
    if (bytes == 2) v = (v << 8) | buf[pos + i * bytes + 1];
    if (v > maxval) throw ImageFormatError("PNM sample exceeds maxval");
    img.data[i] = static_cast<double>(v) / peak;
  }
  return img;
}

inline std::vector<unsigned char> encode_pnm(const Image& img, int bit_depth) {
  const std::uint32_t maxval = bit_depth == 16 ? 65535 : 255;
  std::ostringstream header;
  header << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << '\n' << maxval << '\n';
  const std::string hs = header.str();
  std::vector<unsigned char> out(hs.begin(), hs.end());
  for (double v : img.data) {
    const std::uint32_t q = quantize(v, maxval);
    if (bit_depth == 16) out.push_back(static_cast<unsigned char>(q >> 8));
    out.push_back(static_cast<unsigned char>(q & 0xff));
  }
  return out;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReadState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  png_uint_32 width = 0, height = 0;
  int channels = 0, bit_depth = 0;
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
};

// No C++ objects are constructed between setjmp and the libpng calls.
inline bool png_read_raw(std::FILE* fp, PngReadState& st) {
  if (setjmp(png_jmpbuf(st.png))) return false;
  png_init_io(st.png, fp);
  png_read_info(st.png, st.info);
  const int color = png_get_color_type(st.png, st.info);
  const int depth = png_get_bit_depth(st.png, st.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(st.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(st.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(st.png);
  png_read_update_info(st.png, st.info);
  st.width = png_get_image_width(st.png, st.info);
  st.height = png_get_image_height(st.png, st.info);
  st.channels = png_get_channels(st.png, st.info);
  st.bit_depth = png_get_bit_depth(st.png, st.info);
  const std::size_t rowbytes = png_get_rowbytes(st.png, st.info);
  st.pixels.resize(rowbytes * st.height);
  st.rows.resize(st.height);
  for (png_uint_32 r = 0; r < st.height; ++r) st.rows[r] = st.pixels.data() + r * rowbytes;
  png_read_image(st.png, st.rows.data());
  png_read_end(st.png, nullptr);
  return true;
}

inline Image load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw ImageFormatError("not a PNG file: " + path);
  PngReadState st;
  st.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!st.png) throw std::runtime_error("libpng initialization failed");
  st.info = png_create_info_struct(st.png);
  png_set_sig_bytes(st.png, 8);
  const bool ok = st.info && png_read_raw(fp.get(), st);
  png_destroy_read_struct(&st.png, &st.info, nullptr);
  if (!ok) throw ImageFormatError("malformed or truncated PNG: " + path);
  if (st.channels != 1 && st.channels != 3) throw ImageFormatError("unsupported PNG channel layout");
  if (st.bit_depth != 8 && st.bit_depth != 16) throw ImageFormatError("unsupported PNG bit depth");

  Image img(st.width, st.height, static_cast<std::size_t>(st.channels));
  const double peak = st.bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bytes = st.bit_depth == 16 ? 2 : 1;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    std::uint32_t v = st.pixels[i * bytes];
    if (bytes == 2) v = (v << 8) | st.pixels[i * bytes + 1];
    img.data[i] = static_cast<double>(v) / peak;
  }
  return img;
}

inline bool png_write_raw(std::FILE* fp, png_structp png, png_infop info, const Image& img, int bit_depth,
                          png_bytep* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), bit_depth,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

inline void save_png(const Image& img, const std::string& path, int bit_depth) {
  const std::uint32_t maxval = bit_depth == 16 ? 65535 : 255;
  const std::size_t bytes = bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> pixels;
  pixels.reserve(img.data.size() * bytes);
  for (double v : img.data) {
    const std::uint32_t q = quantize(v, maxval);
    if (bytes == 2) pixels.push_back(static_cast<unsigned char>(q >> 8));
    pixels.push_back(static_cast<unsigned char>(q & 0xff));
  }
  const std::size_t rowbytes = img.width * img.channels * bytes;
  std::vector<png_bytep> rows(img.height);
  for (std::size_t r = 0; r < img.height; ++r) rows[r] = pixels.data() + r * rowbytes;

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  const bool ok = info && png_write_raw(fp.get(), png, info, img, bit_depth, rows.data());
  png_destroy_write_struct(&png, &info);
  if (!ok) throw std::runtime_error("PNG encoding failed: " + path);
}

}  // namespace detail

/// Loads PGM (P5, 8/16-bit), PPM (P6) or PNG; intensities scaled to [0, 1].
inline Image load_image(const std::string& path) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return detail::load_png(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return detail::decode_pnm(buf);
}

/// Saves by extension: .pgm (1 channel), .ppm (3 channels), .png (either).
/// Values are clamped to [0, 1] and quantized round-half-up.
inline void save_image(const Image& img, const std::string& path, int bit_depth = 8) {
  check_image(img);
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("bit depth must be 8 or 16");
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return detail::save_png(img, path, bit_depth);
  if (ext == ".pgm" && img.channels != 1) throw std::invalid_argument("PGM output needs a single-channel image");
  if (ext == ".ppm" && img.channels != 3) throw std::invalid_argument("PPM output needs a 3-channel image");
  if (ext != ".pgm" && ext != ".ppm") throw std::invalid_argument("unsupported output extension '" + ext + "'");
  const std::vector<unsigned char> bytes = detail::encode_pnm(img, bit_depth);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

/// In-memory PNM decode, mostly for tests.
inline Image decode_pnm(const std::vector<unsigned char>& bytes) { return detail::decode_pnm(bytes); }

}  // namespace opguide
