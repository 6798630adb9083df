#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace dpe {

// Dense row-major 2D grid. Used for images, masks, label maps and
// per-pixel state alike.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * static_cast<size_t>(height), fill) {
    if (width < 0 || height < 0) {
      throw std::invalid_argument("Grid: negative dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool Contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool Contains(const Eigen::Vector2i& p) const { return Contains(p.x(), p.y()); }

  T& operator()(int x, int y) { return data_[Index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[Index(x, y)]; }
  T& operator()(const Eigen::Vector2i& p) { return (*this)(p.x(), p.y()); }
  const T& operator()(const Eigen::Vector2i& p) const {
    return (*this)(p.x(), p.y());
  }

  size_t Index(int x, int y) const {
    return static_cast<size_t>(y) * static_cast<size_t>(width_) +
           static_cast<size_t>(x);
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* row(int y) { return data_.data() + Index(0, y); }
  const T* row(int y) const { return data_.data() + Index(0, y); }

  void Fill(const T& value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  bool SameShape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Grid& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Grayscale intensities in [0, 255].
using GrayImage = Grid<float>;
// Binary mask, 0 or 1 (PGM/PNG writers scale to 0/255).
using Mask = Grid<uint8_t>;
using DepthMap = Grid<double>;
using NormalMap = Grid<Eigen::Vector3d>;
using LabelMap = Grid<int>;

// Bilinear lookup with (0,0) at the center of the top-left pixel. Returns
// false if the 2x2 support leaves the image.
inline bool SampleBilinear(const GrayImage& image, double x, double y,
                           float* value) {
  if (!(x >= 0.0 && y >= 0.0 && x <= image.width() - 1 &&
        y <= image.height() - 1)) {
    return false;
  }
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, image.width() - 1);
  const int y1 = std::min(y0 + 1, image.height() - 1);
  const float fx = static_cast<float>(x - x0);
  const float fy = static_cast<float>(y - y0);
  const float* r0 = image.row(y0);
  const float* r1 = image.row(y1);
  const float top = r0[x0] + fx * (r0[x1] - r0[x0]);
  const float bottom = r1[x0] + fx * (r1[x1] - r1[x0]);
  *value = top + fy * (bottom - top);
  return true;
}

}  // namespace dpe
