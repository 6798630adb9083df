#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace dpe {

struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> normals;
  std::vector<uint8_t> gray;

  size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
};

}  // namespace dpe
