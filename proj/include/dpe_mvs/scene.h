#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dpe_mvs/geometry.h"
#include "dpe_mvs/image.h"
#include "dpe_mvs/pipeline.h"

namespace dpe {

enum class TextureKind { kChecker, kGradient, kUniform, kNoise };

struct Texture {
  TextureKind kind = TextureKind::kUniform;
  double cell = 0.1;     // checker/noise cell size, gradient period (scene units)
  double low = 40.0;     // checker/gradient dark value
  double high = 200.0;   // checker/gradient bright value
  double value = 128.0;  // uniform value, noise mean
  double amplitude = 60.0;
  uint64_t seed = 1;

  double Sample(double u, double v) const;
};

// Planar polygon with an orthonormal in-plane frame (u, v) at `origin`.
struct ScenePlane {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d u_axis = Eigen::Vector3d::UnitX();
  Eigen::Vector3d v_axis = Eigen::Vector3d::UnitY();
  std::vector<Eigen::Vector2d> polygon;  // in (u, v) coordinates
  Texture texture;

  Eigen::Vector3d Normal() const { return u_axis.cross(v_axis).normalized(); }
  bool Contains(double u, double v) const;
};

struct SceneSpec {
  std::string name;
  int width = 320;
  int height = 240;
  double depth_min = 1.0;
  double depth_max = 10.0;
  int supersampling = 3;
  std::vector<ScenePlane> planes;
  std::vector<CameraModel> cameras;

  void Validate() const;
};

struct RenderedScene {
  SceneSpec spec;
  std::vector<View> views;
  std::vector<DepthMap> gt_depth;    // 0 where no plane is hit
  std::vector<NormalMap> gt_normal;  // camera frame, facing the camera
  std::vector<LabelMap> plane_id;    // -1 where no plane is hit
};

// Expresses all planes and cameras in the first camera's frame.
SceneSpec NormalizeToFirstCamera(const SceneSpec& spec);

// Camera with the given intrinsics looking from `eye` at `target`, image y
// pointing toward world +y.
CameraModel MakeCamera(double fx, double fy, double cx, double cy, int width,
                       int height, const Eigen::Vector3d& eye,
                       const Eigen::Vector3d& target);

// Axis-aligned rectangle in a plane spanned by `u` and `v` through `origin`.
ScenePlane Rectangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& u,
                     const Eigen::Vector3d& v, double u_min, double u_max,
                     double v_min, double v_max, const Texture& texture);

RenderedScene RenderScene(const SceneSpec& spec);

std::vector<std::string> CorpusNames();
// Built-in scenes: textured-box, lowtex-wall, stochastic-lawn,
// two-plane-edge. Throws std::invalid_argument for other names.
SceneSpec CorpusScene(const std::string& name);

// Text scene description; see README for the grammar.
SceneSpec ReadSceneFile(const std::string& path);
SceneSpec ParseScene(const std::string& text);

// Loads a corpus name or a scene file path.
SceneSpec LoadScene(const std::string& name_or_path);

}  // namespace dpe
