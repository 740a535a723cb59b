#include "voxsl/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

namespace voxsl {

namespace {

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.seekg(0, std::ios::end);
  const auto n = f.tellg();
  f.seekg(0);
  std::vector<char> buf(static_cast<size_t>(n));
  f.read(buf.data(), n);
  if (!f) throw std::runtime_error("cannot read " + path);
  return buf;
}

// Atomic write: temp file in the same directory, then rename over the target.
void spill(const std::string& path, const void* data, size_t n) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    f.flush();
    if (!f) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

struct HeaderCursor {
  const std::vector<char>& buf;
  size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < buf.size()) {
      const char c = buf[pos];
      if (c == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::string token(const char* what) {
    skip_space_and_comments();
    const size_t start = pos;
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    if (pos == start) throw ImageFormatError(std::string("missing ") + what, start);
    return std::string(buf.begin() + start, buf.begin() + pos);
  }

  long integer(const char* what) {
    const size_t at = pos;
    const std::string t = token(what);
    try {
      size_t used = 0;
      const long v = std::stol(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw ImageFormatError(std::string("bad ") + what + " '" + t + "'", at);
    }
  }

  double real(const char* what) {
    const size_t at = pos;
    const std::string t = token(what);
    try {
      size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw ImageFormatError(std::string("bad ") + what + " '" + t + "'", at);
    }
  }
};

}  // namespace

// --------------------------------------------------------------------------
// PFM

ImageF read_pfm(const std::string& path) {
  const std::vector<char> buf = slurp(path);
  HeaderCursor cur{buf};

  const std::string magic = cur.token("magic");
  if (magic == "PF")
    throw ImageFormatError("color PFM not supported (expected grayscale 'Pf')", 0);
  if (magic != "Pf") throw ImageFormatError("bad PFM magic '" + magic + "'", 0);

  const long w = cur.integer("width");
  const long h = cur.integer("height");
  if (w <= 0 || h <= 0 || w > (1 << 20) || h > (1 << 20))
    throw ImageFormatError("implausible PFM dimensions", cur.pos);
  const double scale = cur.real("scale");
  if (scale == 0.0) throw ImageFormatError("PFM scale must be nonzero", cur.pos);
  // Exactly one whitespace byte separates the header from the payload.
  if (cur.pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[cur.pos])))
    throw ImageFormatError("missing separator before PFM payload", cur.pos);
  ++cur.pos;

  const size_t count = static_cast<size_t>(w) * static_cast<size_t>(h);
  if (buf.size() - cur.pos < count * 4)
    throw ImageFormatError("truncated PFM payload", buf.size());

  const bool file_little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;

  ImageF img(static_cast<int>(w), static_cast<int>(h));
  const char* src = buf.data() + cur.pos;
  // PFM stores the bottom row first.
  for (long r = h - 1; r >= 0; --r) {
    float* dst = img.row_ptr(static_cast<int>(r));
    std::memcpy(dst, src, static_cast<size_t>(w) * 4);
    src += static_cast<size_t>(w) * 4;
    if (file_little != host_little) {
      for (long c = 0; c < w; ++c) {
        uint32_t v;
        std::memcpy(&v, &dst[c], 4);
        v = __builtin_bswap32(v);
        std::memcpy(&dst[c], &v, 4);
      }
    }
  }
  return img;
}

void write_pfm(const std::string& path, const ImageF& img) {
  if (img.empty()) throw std::invalid_argument("write_pfm: empty image");
  char header[64];
  const int hlen =
      std::snprintf(header, sizeof(header), "Pf\n%d %d\n-1.0\n", img.width(), img.height());

  std::vector<char> out(static_cast<size_t>(hlen) + img.size() * 4);
  std::memcpy(out.data(), header, static_cast<size_t>(hlen));
  char* dst = out.data() + hlen;
  for (int r = img.height() - 1; r >= 0; --r) {
    std::memcpy(dst, img.row_ptr(r), static_cast<size_t>(img.width()) * 4);
    dst += static_cast<size_t>(img.width()) * 4;
  }
  spill(path, out.data(), out.size());
}

// --------------------------------------------------------------------------
// PGM

namespace {

ImageF read_pgm(const std::vector<char>& buf) {
  HeaderCursor cur{buf};
  const std::string magic = cur.token("magic");
  if (magic != "P5") throw ImageFormatError("unsupported PNM magic '" + magic + "'", 0);
  const long w = cur.integer("width");
  const long h = cur.integer("height");
  const long maxval = cur.integer("maxval");
  if (w <= 0 || h <= 0) throw ImageFormatError("implausible PGM dimensions", cur.pos);
  if (maxval != 255 && maxval != 65535)
    throw ImageFormatError("unsupported PGM maxval " + std::to_string(maxval), cur.pos);
  if (cur.pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[cur.pos])))
    throw ImageFormatError("missing separator before PGM payload", cur.pos);
  ++cur.pos;

  const int bytes = maxval == 255 ? 1 : 2;
  const size_t need = static_cast<size_t>(w) * h * bytes;
  if (buf.size() - cur.pos < need) throw ImageFormatError("truncated PGM payload", buf.size());

  ImageF img(static_cast<int>(w), static_cast<int>(h));
  const unsigned char* src = reinterpret_cast<const unsigned char*>(buf.data() + cur.pos);
  const float norm = 1.0f / static_cast<float>(maxval);
  for (size_t i = 0; i < img.size(); ++i) {
    if (bytes == 1) {
      img.data()[i] = src[i] * norm;
    } else {
      // PGM 16-bit is big-endian.
      img.data()[i] = static_cast<float>((src[2 * i] << 8) | src[2 * i + 1]) * norm;
    }
  }
  return img;
}

void write_pgm(const std::string& path, const ImageF& img, int bits) {
  const long maxval = bits == 8 ? 255 : 65535;
  char header[64];
  const int hlen = std::snprintf(header, sizeof(header), "P5\n%d %d\n%ld\n", img.width(),
                                 img.height(), maxval);
  const int bytes = bits == 8 ? 1 : 2;
  std::vector<char> out(static_cast<size_t>(hlen) + img.size() * bytes);
  std::memcpy(out.data(), header, static_cast<size_t>(hlen));
  unsigned char* dst = reinterpret_cast<unsigned char*>(out.data() + hlen);
  for (size_t i = 0; i < img.size(); ++i) {
    const float v = std::clamp(img.data()[i], 0.0f, 1.0f);
    const long q = std::lround(static_cast<double>(v) * maxval);
    if (bytes == 1) {
      dst[i] = static_cast<unsigned char>(q);
    } else {
      dst[2 * i] = static_cast<unsigned char>(q >> 8);
      dst[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
    }
  }
  spill(path, out.data(), out.size());
}

// --------------------------------------------------------------------------
// PNG (grayscale only)

struct PngReadCtx {
  const unsigned char* data;
  size_t size;
  size_t pos;
};

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
  if (ctx->pos + n > ctx->size) png_error(png, "read past end of buffer");
  std::memcpy(out, ctx->data + ctx->pos, n);
  ctx->pos += n;
}

ImageF read_png(const std::vector<char>& buf, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  ImageF img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> raster;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageFormatError("corrupt PNG " + path, 0);
  }

  PngReadCtx ctx{reinterpret_cast<const unsigned char*>(buf.data()), buf.size(), 0};
  png_set_read_fn(png, &ctx, png_read_fn);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported format: PNG must be grayscale without alpha: " + path);
  }
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  png_byte depth = png_get_bit_depth(png, info);
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  png_read_update_info(png, info);

  const int bytes = depth == 16 ? 2 : 1;
  raster.assign(static_cast<size_t>(w) * h * bytes, 0);
  rows.resize(h);
  for (png_uint_32 r = 0; r < h; ++r)
    rows[r] = raster.data() + static_cast<size_t>(r) * w * bytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  img = ImageF(static_cast<int>(w), static_cast<int>(h));
  const float norm = 1.0f / (depth == 16 ? 65535.0f : 255.0f);
  for (size_t i = 0; i < img.size(); ++i) {
    if (bytes == 1) {
      img.data()[i] = raster[i] * norm;
    } else {
      // PNG 16-bit samples are big-endian.
      img.data()[i] = static_cast<float>((raster[2 * i] << 8) | raster[2 * i + 1]) * norm;
    }
  }
  return img;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<char>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_fn(png_structp) {}

void write_png(const std::string& path, const ImageF& img, int bits) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }

  const long maxval = bits == 8 ? 255 : 65535;
  const int bytes = bits == 8 ? 1 : 2;
  std::vector<unsigned char> raster(img.size() * bytes);
  for (size_t i = 0; i < img.size(); ++i) {
    const float v = std::clamp(img.data()[i], 0.0f, 1.0f);
    const long q = std::lround(static_cast<double>(v) * maxval);
    if (bytes == 1) {
      raster[i] = static_cast<unsigned char>(q);
    } else {
      raster[2 * i] = static_cast<unsigned char>(q >> 8);
      raster[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
    }
  }
  std::vector<png_bytep> rows(img.height());
  for (int r = 0; r < img.height(); ++r)
    rows[r] = raster.data() + static_cast<size_t>(r) * img.width() * bytes;

  std::vector<char> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png encode failed for " + path);
  }
  png_set_write_fn(png, &out, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, img.width(), img.height(), bits, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);

  spill(path, out.data(), out.size());
}

bool has_extension(const std::string& path, const char* ext) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return false;
  std::string e = path.substr(dot);
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

}  // namespace

ImageF read_gray(const std::string& path) {
  const std::vector<char> buf = slurp(path);
  if (buf.size() >= 2 && buf[0] == 'P' && buf[1] == '5') return read_pgm(buf);
  if (buf.size() >= 8 && std::memcmp(buf.data(), "\x89PNG\r\n\x1a\n", 8) == 0)
    return read_png(buf, path);
  if (buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '6' || buf[1] == '3'))
    throw std::runtime_error("unsupported format: color PNM rejected: " + path);
  throw ImageFormatError("unrecognized grayscale image format in " + path, 0);
}

void write_gray(const std::string& path, const ImageF& img, int bits) {
  if (bits != 8 && bits != 16)
    throw std::invalid_argument("write_gray: bits must be 8 or 16");
  if (img.empty()) throw std::invalid_argument("write_gray: empty image");
  if (has_extension(path, ".png")) {
    write_png(path, img, bits);
  } else {
    write_pgm(path, img, bits);
  }
}

}  // namespace voxsl
