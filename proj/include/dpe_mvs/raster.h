#pragma once

#include <cstdlib>

#include <Eigen/Core>

namespace dpe {

// Bresenham rasterization, 8-connected.
template <typename Fn>
inline void RasterizeLine(Eigen::Vector2i a, const Eigen::Vector2i& b, Fn&& visit) {
  const int dx = std::abs(b.x() - a.x());
  const int dy = -std::abs(b.y() - a.y());
  const int sx = a.x() < b.x() ? 1 : -1;
  const int sy = a.y() < b.y() ? 1 : -1;
  int err = dx + dy;
  while (true) {
    visit(a);
    if (a == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      a.x() += sx;
    }
    if (e2 <= dx) {
      err += dx;
      a.y() += sy;
    }
  }
}

}  // namespace dpe
