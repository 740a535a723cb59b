#pragma once

#include <stdexcept>
#include <string>

#include "voxsl/image.hpp"

namespace voxsl {

// Parse failures carry the byte offset where the format broke down.
class ImageFormatError : public std::runtime_error {
 public:
  ImageFormatError(const std::string& msg, size_t byte_offset)
      : std::runtime_error(msg + " (byte " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  size_t offset;
};

// PFM, grayscale ("Pf"). Rows are stored bottom-to-top; a negative scale
// means little-endian payload. Values round-trip bit-exactly.
ImageF read_pfm(const std::string& path);
void write_pfm(const std::string& path, const ImageF& img);

// 8/16-bit grayscale PGM (P5) or PNG, normalized to [0,1] by 1/(2^bits - 1).
// Color inputs are rejected.
ImageF read_gray(const std::string& path);

// bits must be 8 or 16; values are clamped to [0,1] and quantized. The
// container is chosen from the extension (.pgm or .png).
void write_gray(const std::string& path, const ImageF& img, int bits);

}  // namespace voxsl
