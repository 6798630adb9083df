#include "dpe_mvs/geometry.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dpe {

Eigen::Matrix3d CameraModel::K() const {
  Eigen::Matrix3d k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Eigen::Matrix3d CameraModel::InverseK() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx, 0, -cx / fx, 0, 1.0 / fy, -cy / fy, 0, 0, 1;
  return k;
}

void CameraModel::Validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("CameraModel: focal lengths must be positive");
  }
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if (!rtr.isApprox(Eigen::Matrix3d::Identity(), 1e-6) ||
      (rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
    throw std::invalid_argument("CameraModel: rotation is not orthonormal");
  }
  if (width > 0 && height > 0 &&
      (cx < 0.0 || cy < 0.0 || cx > width || cy > height)) {
    throw std::invalid_argument("CameraModel: principal point outside image");
  }
}

std::optional<Projection> TryProject(const Eigen::Vector3d& point,
                                     const CameraModel& camera) {
  const Eigen::Vector3d xc = camera.WorldToCamera(point);
  if (!(xc.z() > 0.0)) {
    return std::nullopt;
  }
  return Projection{{camera.fx * xc.x() / xc.z() + camera.cx,
                     camera.fy * xc.y() / xc.z() + camera.cy},
                    xc.z()};
}

Projection Project(const Eigen::Vector3d& point, const CameraModel& camera) {
  auto projection = TryProject(point, camera);
  if (!projection) {
    throw GeometryError("Project: point is behind the camera");
  }
  return *projection;
}

Eigen::Vector3d Unproject(const Eigen::Vector2d& pixel, double depth,
                          const CameraModel& camera) {
  if (!(depth > 0.0)) {
    throw GeometryError("Unproject: depth must be positive");
  }
  return camera.CameraToWorld(depth * camera.Ray(pixel));
}

ViewPairGeometry::ViewPairGeometry(const CameraModel& ref,
                                   const CameraModel& src)
    : ref_inverse_k_(ref.InverseK()),
      ref_fx_(ref.fx),
      ref_fy_(ref.fy),
      ref_cx_(ref.cx),
      ref_cy_(ref.cy) {
  const Eigen::Matrix3d k_src = src.K();
  rotation_term_ =
      k_src * src.rotation * ref.rotation.transpose() * ref_inverse_k_;
  translation_term_ = k_src * src.rotation * (ref.center - src.center);
}

std::optional<Eigen::Matrix3d> ViewPairGeometry::Homography(
    const Eigen::Vector2d& pixel, const PlaneHypothesis& hyp) const {
  const Eigen::Vector3d ray((pixel.x() - ref_cx_) / ref_fx_,
                            (pixel.y() - ref_cy_) / ref_fy_, 1.0);
  const double denom = hyp.depth * hyp.normal.dot(ray);
  if (!std::isfinite(denom) || std::abs(denom) < 1e-9 * std::abs(hyp.depth)) {
    return std::nullopt;
  }
  const Eigen::RowVector3d plane_row =
      hyp.normal.transpose() * ref_inverse_k_ / denom;
  return Eigen::Matrix3d(rotation_term_ + translation_term_ * plane_row);
}

Eigen::Matrix3d HomographyForPlane(const CameraModel& ref,
                                   const CameraModel& src,
                                   const Eigen::Vector2d& pixel,
                                   const PlaneHypothesis& hyp) {
  auto h = ViewPairGeometry(ref, src).Homography(pixel, hyp);
  if (!h) {
    throw GeometryError("HomographyForPlane: degenerate plane");
  }
  return *h;
}

CameraPlane ToCameraFrame(const PlaneModel& plane, const CameraModel& camera) {
  // m . (R^T Xc + C) + b = (R m) . Xc + (m . C + b)
  return {camera.rotation * plane.normal,
          plane.normal.dot(camera.center) + plane.offset};
}

std::optional<double> TryDepthFromPlane(const CameraPlane& plane,
                                        const Eigen::Vector2d& pixel,
                                        const CameraModel& camera) {
  const double m1 = plane.normal.x();
  const double m2 = plane.normal.y();
  const double m3 = plane.normal.z();
  const double denom = m1 * camera.fy * (pixel.x() - camera.cx) +
                       m2 * camera.fx * (pixel.y() - camera.cy) +
                       m3 * camera.fx * camera.fy;
  if (!(std::abs(denom) >= 1e-12)) {
    return std::nullopt;
  }
  return -plane.offset * camera.fx * camera.fy / denom;
}

std::optional<double> TryDepthFromPlane(const PlaneModel& plane,
                                        const Eigen::Vector2d& pixel,
                                        const CameraModel& camera) {
  return TryDepthFromPlane(ToCameraFrame(plane, camera), pixel, camera);
}

double DepthFromPlane(const PlaneModel& plane, const Eigen::Vector2d& pixel,
                      const CameraModel& camera) {
  auto depth = TryDepthFromPlane(plane, pixel, camera);
  if (!depth) {
    throw GeometryError("DepthFromPlane: viewing ray parallel to plane");
  }
  return *depth;
}

std::optional<PlaneModel> TryPlaneFromThreePoints(const Eigen::Vector3d& p1,
                                                  const Eigen::Vector3d& p2,
                                                  const Eigen::Vector3d& p3) {
  const Eigen::Vector3d e1 = p2 - p1;
  const Eigen::Vector3d e2 = p3 - p1;
  const Eigen::Vector3d cross = e1.cross(e2);
  const double scale =
      std::max({e1.norm(), e2.norm(), (p3 - p2).norm()});
  if (!(scale > 0.0) || !(cross.norm() > 1e-10 * scale * scale)) {
    return std::nullopt;
  }
  PlaneModel plane;
  plane.normal = cross.normalized();
  plane.offset = -plane.normal.dot(p1);
  return plane;
}

PlaneModel PlaneFromThreePoints(const Eigen::Vector3d& p1,
                                const Eigen::Vector3d& p2,
                                const Eigen::Vector3d& p3) {
  auto plane = TryPlaneFromThreePoints(p1, p2, p3);
  if (!plane) {
    throw GeometryError("PlaneFromThreePoints: collinear points");
  }
  return *plane;
}

Eigen::Vector3d OrientTowardCamera(const Eigen::Vector3d& normal,
                                   const Eigen::Vector3d& ray) {
  return normal.dot(ray) > 0.0 ? Eigen::Vector3d(-normal) : normal;
}

std::optional<PlaneHypothesis> TryHypothesisFromPlane(
    const PlaneModel& plane, const Eigen::Vector2d& pixel,
    const CameraModel& camera) {
  const CameraPlane cam_plane = ToCameraFrame(plane, camera);
  auto depth = TryDepthFromPlane(cam_plane, pixel, camera);
  if (!depth) {
    return std::nullopt;
  }
  return PlaneHypothesis{
      OrientTowardCamera(cam_plane.normal.normalized(), camera.Ray(pixel)),
      *depth};
}

PlaneHypothesis HypothesisFromPlane(const PlaneModel& plane,
                                    const Eigen::Vector2d& pixel,
                                    const CameraModel& camera) {
  auto hyp = TryHypothesisFromPlane(plane, pixel, camera);
  if (!hyp) {
    throw GeometryError("HypothesisFromPlane: viewing ray parallel to plane");
  }
  return *hyp;
}

std::optional<PlaneHypothesis> TransferHypothesis(const PlaneHypothesis& hyp,
                                                  const Eigen::Vector2d& from,
                                                  const Eigen::Vector2d& to,
                                                  const CameraModel& camera) {
  const double rho = hyp.depth * hyp.normal.dot(camera.Ray(from));
  const double denom = hyp.normal.dot(camera.Ray(to));
  if (!(denom < -1e-9)) {
    return std::nullopt;
  }
  const double depth = rho / denom;
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    return std::nullopt;
  }
  return PlaneHypothesis{hyp.normal, depth};
}

PlaneModel PlaneFromHypothesis(const PlaneHypothesis& hyp,
                               const Eigen::Vector2d& pixel,
                               const CameraModel& camera) {
  PlaneModel plane;
  plane.normal = camera.rotation.transpose() * hyp.normal;
  plane.offset = -plane.normal.dot(Unproject(pixel, hyp.depth, camera));
  return plane;
}

Eigen::Matrix3d LookAtRotation(const Eigen::Vector3d& eye,
                               const Eigen::Vector3d& target,
                               const Eigen::Vector3d& down) {
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d x = down.cross(z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return r;
}

std::vector<CameraEntry> ReadCameraFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("Cannot open camera file: " + path);
  }
  std::vector<CameraEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    const auto last = line.find_last_not_of(" \t\r");
    CameraEntry entry;
    entry.image = line.substr(first, last - first + 1);
    CameraModel& cam = entry.camera;
    in >> cam.fx >> cam.fy >> cam.cx >> cam.cy;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        in >> cam.rotation(r, c);
      }
    }
    in >> cam.center.x() >> cam.center.y() >> cam.center.z();
    in >> entry.depth_min >> entry.depth_max;
    if (!in) {
      throw std::runtime_error("Malformed camera block for " + entry.image +
                               " in " + path);
    }
    std::getline(in, line);  // rest of the d_min d_max line
    cam.Validate();
    entries.push_back(std::move(entry));
  }
  return entries;
}

void WriteCameraFile(const std::string& path,
                     const std::vector<CameraEntry>& entries) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("Cannot write camera file: " + path);
  }
  out << std::setprecision(17);
  for (const CameraEntry& entry : entries) {
    const CameraModel& cam = entry.camera;
    out << entry.image << "\n";
    out << cam.fx << " " << cam.fy << " " << cam.cx << " " << cam.cy << "\n";
    for (int r = 0; r < 3; ++r) {
      out << cam.rotation(r, 0) << " " << cam.rotation(r, 1) << " "
          << cam.rotation(r, 2) << "\n";
    }
    out << cam.center.x() << " " << cam.center.y() << " " << cam.center.z()
        << "\n";
    out << entry.depth_min << " " << entry.depth_max << "\n";
  }
}

}  // namespace dpe
