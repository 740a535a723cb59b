#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace voxsl {

// Dense row-major raster, top row first. Pixel (row, col) with half-integer
// centers: the center of pixel (r, c) sits at continuous (r + 0.5, c + 0.5).
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * static_cast<size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& at(int row, int col) {
    assert(row >= 0 && row < height_ && col >= 0 && col < width_);
    return data_[static_cast<size_t>(row) * width_ + col];
  }
  const T& at(int row, int col) const {
    assert(row >= 0 && row < height_ && col >= 0 && col < width_);
    return data_[static_cast<size_t>(row) * width_ + col];
  }

  T* row_ptr(int row) { return data_.data() + static_cast<size_t>(row) * width_; }
  const T* row_ptr(int row) const { return data_.data() + static_cast<size_t>(row) * width_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  std::vector<T>& pixels() { return data_; }
  const std::vector<T>& pixels() const { return data_; }

  bool same_size(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_size(const Image<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ImageF = Image<float>;
using ImageU8 = Image<uint8_t>;

}  // namespace voxsl
