#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dpe {

// Raised for geometric configurations an operation cannot handle: points
// behind the camera, rays parallel to a plane, collinear samples, planes
// through a camera center.
class GeometryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Pinhole camera. `rotation` maps world to camera coordinates and `center`
// is the camera center in world coordinates, so X_cam = R (X - C).
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  int width = 0;
  int height = 0;

  Eigen::Matrix3d K() const;
  Eigen::Matrix3d InverseK() const;

  // Camera-frame viewing ray with unit z component, i.e. K^-1 [u v 1]^T.
  Eigen::Vector3d Ray(const Eigen::Vector2d& pixel) const {
    return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0};
  }

  Eigen::Vector3d WorldToCamera(const Eigen::Vector3d& point) const {
    return rotation * (point - center);
  }
  Eigen::Vector3d CameraToWorld(const Eigen::Vector3d& point) const {
    return rotation.transpose() * point + center;
  }

  // Throws std::invalid_argument if the invariants do not hold.
  void Validate() const;
};

// Local plane at one pixel: camera-frame unit normal plus the z-depth of
// the pixel's own 3D point. Normals face the camera (n . ray < 0).
struct PlaneHypothesis {
  Eigen::Vector3d normal = Eigen::Vector3d(0, 0, -1);
  double depth = 1.0;
};

// World plane m . X + b = 0 with |m| = 1. RANSAC fills `inliers` (candidate
// indices) and `anchors` (pixels).
struct PlaneModel {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
  std::vector<int> inliers;
  std::vector<Eigen::Vector2i> anchors;

  double SignedDistance(const Eigen::Vector3d& point) const {
    return normal.dot(point) + offset;
  }
};

struct Projection {
  Eigen::Vector2d pixel;
  double depth = 0.0;
};

Projection Project(const Eigen::Vector3d& point, const CameraModel& camera);
std::optional<Projection> TryProject(const Eigen::Vector3d& point,
                                     const CameraModel& camera);

Eigen::Vector3d Unproject(const Eigen::Vector2d& pixel, double depth,
                          const CameraModel& camera);

// Plane-induced homography between a reference and a source camera. The
// per-pair terms are computed once; Homography() is called per hypothesis.
class ViewPairGeometry {
 public:
  ViewPairGeometry() = default;
  ViewPairGeometry(const CameraModel& ref, const CameraModel& src);

  // Maps homogeneous reference pixels to source pixels for the plane of
  // `hyp` anchored at `pixel`. nullopt when the plane passes (numerically)
  // through the reference center.
  std::optional<Eigen::Matrix3d> Homography(const Eigen::Vector2d& pixel,
                                            const PlaneHypothesis& hyp) const;

 private:
  Eigen::Matrix3d rotation_term_;     // K_src R_src R_ref^T K_ref^-1
  Eigen::Vector3d translation_term_;  // K_src R_src (C_ref - C_src)
  Eigen::Matrix3d ref_inverse_k_;
  double ref_fx_ = 1, ref_fy_ = 1, ref_cx_ = 0, ref_cy_ = 0;
};

// Throws GeometryError for a degenerate plane.
Eigen::Matrix3d HomographyForPlane(const CameraModel& ref,
                                   const CameraModel& src,
                                   const Eigen::Vector2d& pixel,
                                   const PlaneHypothesis& hyp);

inline Eigen::Vector2d ApplyHomography(const Eigen::Matrix3d& h,
                                       const Eigen::Vector2d& pixel) {
  const Eigen::Vector3d q = h * pixel.homogeneous();
  return q.hnormalized();
}

// Plane coefficients expressed in the camera frame.
struct CameraPlane {
  Eigen::Vector3d normal;
  double offset;
};
CameraPlane ToCameraFrame(const PlaneModel& plane, const CameraModel& camera);

// z-depth at which the pixel ray meets the plane (closed form from the
// intrinsics). Throws GeometryError when the ray is parallel to the plane.
double DepthFromPlane(const PlaneModel& plane, const Eigen::Vector2d& pixel,
                      const CameraModel& camera);
std::optional<double> TryDepthFromPlane(const PlaneModel& plane,
                                        const Eigen::Vector2d& pixel,
                                        const CameraModel& camera);
std::optional<double> TryDepthFromPlane(const CameraPlane& plane,
                                        const Eigen::Vector2d& pixel,
                                        const CameraModel& camera);

// Throws GeometryError on (near-)collinear input.
PlaneModel PlaneFromThreePoints(const Eigen::Vector3d& p1,
                                const Eigen::Vector3d& p2,
                                const Eigen::Vector3d& p3);
std::optional<PlaneModel> TryPlaneFromThreePoints(const Eigen::Vector3d& p1,
                                                  const Eigen::Vector3d& p2,
                                                  const Eigen::Vector3d& p3);

PlaneHypothesis HypothesisFromPlane(const PlaneModel& plane,
                                    const Eigen::Vector2d& pixel,
                                    const CameraModel& camera);
std::optional<PlaneHypothesis> TryHypothesisFromPlane(
    const PlaneModel& plane, const Eigen::Vector2d& pixel,
    const CameraModel& camera);

// Re-expresses the plane of `hyp` (anchored at `from`) at pixel `to`.
std::optional<PlaneHypothesis> TransferHypothesis(const PlaneHypothesis& hyp,
                                                  const Eigen::Vector2d& from,
                                                  const Eigen::Vector2d& to,
                                                  const CameraModel& camera);

// World plane through the 3D point of `hyp` at `pixel`.
PlaneModel PlaneFromHypothesis(const PlaneHypothesis& hyp,
                               const Eigen::Vector2d& pixel,
                               const CameraModel& camera);

// Flips `normal` if needed so that it faces the camera along `ray`.
Eigen::Vector3d OrientTowardCamera(const Eigen::Vector3d& normal,
                                   const Eigen::Vector3d& ray);

// World-to-camera rotation looking from `eye` toward `target`, with image y
// pointing as close to `down` as possible.
Eigen::Matrix3d LookAtRotation(const Eigen::Vector3d& eye,
                               const Eigen::Vector3d& target,
                               const Eigen::Vector3d& down);

// Image + camera + depth search range, as stored in a camera file block.
struct CameraEntry {
  std::string image;
  CameraModel camera;
  double depth_min = 0.0;
  double depth_max = 0.0;
};

// Block format per camera: image filename; "fx fy cx cy"; three rotation
// rows; camera center; "d_min d_max". Width/height are not stored and stay 0
// until the image is loaded.
std::vector<CameraEntry> ReadCameraFile(const std::string& path);
void WriteCameraFile(const std::string& path,
                     const std::vector<CameraEntry>& entries);

}  // namespace dpe
