#include "dpe_mvs/scene.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dpe_mvs/random.h"

namespace dpe {
namespace {

struct Hit {
  double depth = std::numeric_limits<double>::infinity();
  int plane = -1;
  double u = 0.0, v = 0.0;
};

// Nearest plane hit along the ray origin + t * dir, where dir has unit
// camera-frame z so that t is the z-depth.
Hit CastRay(const std::vector<ScenePlane>& planes,
            const std::vector<Eigen::Vector3d>& normals,
            const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  Hit hit;
  for (size_t i = 0; i < planes.size(); ++i) {
    const double denom = normals[i].dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double t = normals[i].dot(planes[i].origin - origin) / denom;
    if (!(t > 1e-9) || t >= hit.depth) continue;
    const Eigen::Vector3d rel = origin + t * dir - planes[i].origin;
    const double u = rel.dot(planes[i].u_axis);
    const double v = rel.dot(planes[i].v_axis);
    if (!planes[i].Contains(u, v)) continue;
    hit = {t, static_cast<int>(i), u, v};
  }
  return hit;
}

Texture ParseTexture(std::istringstream& in, const std::string& context) {
  std::string kind;
  in >> kind;
  Texture t;
  if (kind == "checker") {
    t.kind = TextureKind::kChecker;
    in >> t.cell >> t.low >> t.high;
  } else if (kind == "gradient") {
    t.kind = TextureKind::kGradient;
    in >> t.cell >> t.low >> t.high;
  } else if (kind == "uniform") {
    t.kind = TextureKind::kUniform;
    in >> t.value;
  } else if (kind == "noise") {
    t.kind = TextureKind::kNoise;
    in >> t.seed >> t.amplitude >> t.cell >> t.value;
  } else {
    throw std::invalid_argument(context + ": unknown texture '" + kind + "'");
  }
  if (!in) throw std::invalid_argument(context + ": malformed texture parameters");
  return t;
}

Eigen::Vector3d ReadVector(std::istringstream& in) {
  Eigen::Vector3d v;
  in >> v.x() >> v.y() >> v.z();
  return v;
}

Texture Noise(uint64_t seed, double amplitude, double cell, double mean) {
  Texture t;
  t.kind = TextureKind::kNoise;
  t.seed = seed;
  t.amplitude = amplitude;
  t.cell = cell;
  t.value = mean;
  return t;
}

Texture Uniform(double value) {
  Texture t;
  t.kind = TextureKind::kUniform;
  t.value = value;
  return t;
}

// Five visible faces of an axis-aligned box (the face at max y rests on the
// ground and is omitted).
void AddBox(std::vector<ScenePlane>& planes, const Eigen::Vector3d& lo,
            const Eigen::Vector3d& hi, uint64_t seed, double cell) {
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d ey = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d ez = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d size = hi - lo;
  planes.push_back(Rectangle(lo, ex, ey, 0, size.x(), 0, size.y(),
                             Noise(seed, 70, cell, 128)));  // front
  planes.push_back(Rectangle(lo, ex, ez, 0, size.x(), 0, size.z(),
                             Noise(seed + 1, 70, cell, 150)));  // top
  planes.push_back(Rectangle(lo, ez, ey, 0, size.z(), 0, size.y(),
                             Noise(seed + 2, 70, cell, 110)));  // left
  planes.push_back(Rectangle(Eigen::Vector3d(hi.x(), lo.y(), lo.z()), ez, ey, 0,
                             size.z(), 0, size.y(),
                             Noise(seed + 3, 70, cell, 110)));  // right
  planes.push_back(Rectangle(Eigen::Vector3d(lo.x(), lo.y(), hi.z()), ex, ey, 0,
                             size.x(), 0, size.y(),
                             Noise(seed + 4, 70, cell, 128)));  // back
}

}  // namespace

double Texture::Sample(double u, double v) const {
  switch (kind) {
    case TextureKind::kUniform:
      return value;
    case TextureKind::kChecker: {
      const int64_t i = static_cast<int64_t>(std::floor(u / cell));
      const int64_t j = static_cast<int64_t>(std::floor(v / cell));
      return ((i + j) & 1) ? high : low;
    }
    case TextureKind::kGradient: {
      const double t = std::clamp(u / cell, 0.0, 1.0);
      return low + (high - low) * t;
    }
    case TextureKind::kNoise: {
      const int64_t i = static_cast<int64_t>(std::floor(u / cell));
      const int64_t j = static_cast<int64_t>(std::floor(v / cell));
      const uint64_t h = DeriveSeed(seed, {static_cast<uint64_t>(i),
                                           static_cast<uint64_t>(j)});
      const double r = static_cast<double>(h >> 11) * 0x1.0p-53;
      return value + amplitude * (2.0 * r - 1.0);
    }
  }
  return value;
}

bool ScenePlane::Contains(double u, double v) const {
  bool inside = false;
  const size_t n = polygon.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Eigen::Vector2d& a = polygon[i];
    const Eigen::Vector2d& b = polygon[j];
    if ((a.y() > v) != (b.y() > v) &&
        u < (b.x() - a.x()) * (v - a.y()) / (b.y() - a.y()) + a.x()) {
      inside = !inside;
    }
  }
  return inside;
}

void SceneSpec::Validate() const {
  if (width < 16 || height < 16) throw std::invalid_argument("scene: image too small");
  if (!(depth_min > 0.0) || !(depth_max > depth_min)) {
    throw std::invalid_argument("scene: invalid depth bounds");
  }
  if (cameras.size() < 2) throw std::invalid_argument("scene: need >= 2 cameras");
  if (planes.empty()) throw std::invalid_argument("scene: no planes");
  if (supersampling < 1) throw std::invalid_argument("scene: supersampling < 1");
  for (const ScenePlane& p : planes) {
    if (p.polygon.size() < 3) throw std::invalid_argument("scene: polygon < 3 vertices");
    if (std::abs(p.u_axis.norm() - 1.0) > 1e-9 || std::abs(p.v_axis.norm() - 1.0) > 1e-9 ||
        std::abs(p.u_axis.dot(p.v_axis)) > 1e-9) {
      throw std::invalid_argument("scene: plane axes must be orthonormal");
    }
  }
  for (const CameraModel& c : cameras) {
    c.Validate();
    if (c.width != width || c.height != height) {
      throw std::invalid_argument("scene: camera size differs from image size");
    }
  }
}

SceneSpec NormalizeToFirstCamera(const SceneSpec& spec) {
  SceneSpec out = spec;
  const Eigen::Matrix3d r0 = spec.cameras[0].rotation;
  const Eigen::Vector3d c0 = spec.cameras[0].center;
  for (ScenePlane& p : out.planes) {
    p.origin = r0 * (p.origin - c0);
    p.u_axis = (r0 * p.u_axis).normalized();
    p.v_axis = (r0 * p.v_axis).normalized();
  }
  for (CameraModel& c : out.cameras) {
    c.center = r0 * (c.center - c0);
    c.rotation = c.rotation * r0.transpose();
  }
  return out;
}

CameraModel MakeCamera(double fx, double fy, double cx, double cy, int width,
                       int height, const Eigen::Vector3d& eye,
                       const Eigen::Vector3d& target) {
  CameraModel c;
  c.fx = fx;
  c.fy = fy;
  c.cx = cx;
  c.cy = cy;
  c.width = width;
  c.height = height;
  c.center = eye;
  c.rotation = LookAtRotation(eye, target, Eigen::Vector3d::UnitY());
  return c;
}

ScenePlane Rectangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& u,
                     const Eigen::Vector3d& v, double u_min, double u_max,
                     double v_min, double v_max, const Texture& texture) {
  ScenePlane p;
  p.origin = origin;
  p.u_axis = u.normalized();
  p.v_axis = v.normalized();
  p.polygon = {{u_min, v_min}, {u_max, v_min}, {u_max, v_max}, {u_min, v_max}};
  p.texture = texture;
  return p;
}

RenderedScene RenderScene(const SceneSpec& spec) {
  spec.Validate();
  RenderedScene out;
  out.spec = spec;
  std::vector<Eigen::Vector3d> normals;
  for (const ScenePlane& p : spec.planes) normals.push_back(p.Normal());
  const int s = spec.supersampling;
  for (const CameraModel& cam : spec.cameras) {
    View view;
    view.camera = cam;
    view.depth_min = spec.depth_min;
    view.depth_max = spec.depth_max;
    view.image = GrayImage(spec.width, spec.height, 0.0f);
    DepthMap depth(spec.width, spec.height, 0.0);
    NormalMap normal(spec.width, spec.height, Eigen::Vector3d::Zero());
    LabelMap ids(spec.width, spec.height, -1);
    const Eigen::Matrix3d rt = cam.rotation.transpose();
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        double sum = 0.0;
        for (int sy = 0; sy < s; ++sy) {
          for (int sx = 0; sx < s; ++sx) {
            const double px = x + (sx + 0.5) / s - 0.5;
            const double py = y + (sy + 0.5) / s - 0.5;
            const Eigen::Vector3d dir = rt * cam.Ray({px, py});
            const Hit hit = CastRay(spec.planes, normals, cam.center, dir);
            if (hit.plane >= 0) {
              sum += spec.planes[hit.plane].texture.Sample(hit.u, hit.v);
            }
          }
        }
        view.image(x, y) = static_cast<float>(
            std::clamp(std::round(sum / (s * s)), 0.0, 255.0));
        const Eigen::Vector3d dir = rt * cam.Ray({double(x), double(y)});
        const Hit hit = CastRay(spec.planes, normals, cam.center, dir);
        if (hit.plane >= 0) {
          depth(x, y) = hit.depth;
          ids(x, y) = hit.plane;
          normal(x, y) = OrientTowardCamera(cam.rotation * normals[hit.plane],
                                            cam.Ray({double(x), double(y)}));
        }
      }
    }
    out.views.push_back(std::move(view));
    out.gt_depth.push_back(std::move(depth));
    out.gt_normal.push_back(std::move(normal));
    out.plane_id.push_back(std::move(ids));
  }
  return out;
}

std::vector<std::string> CorpusNames() {
  return {"textured-box", "lowtex-wall", "stochastic-lawn", "two-plane-edge"};
}

SceneSpec CorpusScene(const std::string& name) {
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d ey = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d ez = Eigen::Vector3d::UnitZ();
  SceneSpec spec;
  spec.name = name;
  auto add_cameras = [&](double f, const std::vector<Eigen::Vector3d>& eyes,
                         const Eigen::Vector3d& target) {
    for (const Eigen::Vector3d& eye : eyes) {
      spec.cameras.push_back(MakeCamera(f, f, (spec.width - 1) / 2.0,
                                        (spec.height - 1) / 2.0, spec.width,
                                        spec.height, eye, target));
    }
  };
  if (name == "textured-box") {
    spec.width = 640;
    spec.height = 480;
    spec.depth_min = 1.5;
    spec.depth_max = 7.0;
    spec.planes.push_back(Rectangle({0, 0, 5}, ex, ey, -4, 4, -3, 1.0,
                                    Noise(11, 70, 0.02, 128)));
    spec.planes.push_back(Rectangle({0, 1, 0}, ex, ez, -4, 4, 1.0, 5.0,
                                    Noise(12, 70, 0.02, 120)));
    AddBox(spec.planes, {-0.3, 0.2, 2.8}, {0.5, 1.0, 3.6}, 13, 0.015);
    add_cameras(600, {{0, 0, 0}, {-0.25, 0, 0}, {0.25, 0, 0}}, {0, 0.3, 4.5});
  } else if (name == "lowtex-wall") {
    spec.width = 320;
    spec.height = 240;
    spec.depth_min = 1.5;
    spec.depth_max = 6.0;
    spec.planes.push_back(Rectangle({0, 0, 4}, ex, ey, -1.5, 1.5, -1.1, 1.1,
                                    Uniform(150)));
    const Texture frame = Noise(21, 70, 0.03, 128);
    spec.planes.push_back(Rectangle({0, 0, 4}, ex, ey, -3, 3, -2.5, -1.1, frame));
    spec.planes.push_back(Rectangle({0, 0, 4}, ex, ey, -3, 3, 1.1, 2.5, frame));
    spec.planes.push_back(Rectangle({0, 0, 4}, ex, ey, -3, -1.5, -1.1, 1.1, frame));
    spec.planes.push_back(Rectangle({0, 0, 4}, ex, ey, 1.5, 3, -1.1, 1.1, frame));
    AddBox(spec.planes, {-0.35, -0.2, 2.8}, {0.35, 0.5, 3.2}, 22, 0.02);
    add_cameras(300, {{0, 0, 0}, {-0.3, 0, 0}, {0.3, 0, 0}}, {0, 0, 4});
  } else if (name == "stochastic-lawn") {
    spec.width = 320;
    spec.height = 240;
    spec.depth_min = 1.2;
    spec.depth_max = 10.0;
    spec.planes.push_back(Rectangle({0, 1, 0}, ex, ez, -6, 6, 0.5, 8.0,
                                    Noise(31, 80, 0.004, 128)));
    spec.planes.push_back(Rectangle({0, 0, 8}, ex, ey, -8, 8, -6, 1.0,
                                    Noise(32, 70, 0.04, 128)));
    AddBox(spec.planes, {-0.25, 0.5, 2.8}, {0.25, 1.0, 3.3}, 33, 0.015);
    add_cameras(300, {{0, 0, 0}, {-0.25, 0, 0}, {0.25, 0, 0}}, {0, 0.8, 4});
  } else if (name == "two-plane-edge") {
    spec.width = 320;
    spec.height = 240;
    spec.depth_min = 1.5;
    spec.depth_max = 7.0;
    // Faint texture keeps both planes matchable without making them
    // stochastic, so the only strong edge is the occluding boundary.
    spec.planes.push_back(Rectangle({0, 0, 5}, ex, ey, -4, 4, -3, 3,
                                    Noise(41, 12, 0.03, 170)));
    spec.planes.push_back(Rectangle({0, 0, 3}, ex, ey, -3, 0.2, -3, 3,
                                    Noise(42, 12, 0.02, 80)));
    add_cameras(300, {{0, 0, 0}, {-0.3, 0, 0}, {0.3, 0, 0}}, {0, 0, 4});
  } else {
    throw std::invalid_argument("unknown corpus scene '" + name + "'");
  }
  return NormalizeToFirstCamera(spec);
}

SceneSpec ParseScene(const std::string& text) {
  SceneSpec spec;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  struct PendingCamera {
    double fx, fy, cx, cy;
    Eigen::Vector3d eye, target;
  };
  std::vector<PendingCamera> cameras;
  while (std::getline(lines, line)) {
    ++line_no;
    const std::string context = "scene line " + std::to_string(line_no);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream in(line);
    std::string keyword;
    if (!(in >> keyword)) continue;
    if (keyword == "name") {
      in >> spec.name;
    } else if (keyword == "size") {
      in >> spec.width >> spec.height;
    } else if (keyword == "bounds") {
      in >> spec.depth_min >> spec.depth_max;
    } else if (keyword == "supersampling") {
      in >> spec.supersampling;
    } else if (keyword == "camera") {
      PendingCamera c;
      in >> c.fx >> c.fy >> c.cx >> c.cy;
      c.eye = ReadVector(in);
      c.target = ReadVector(in);
      cameras.push_back(c);
    } else if (keyword == "plane") {
      ScenePlane p;
      p.origin = ReadVector(in);
      p.u_axis = ReadVector(in).normalized();
      p.v_axis = ReadVector(in).normalized();
      std::string word;
      in >> word;
      if (word != "texture") throw std::invalid_argument(context + ": expected 'texture'");
      p.texture = ParseTexture(in, context);
      in >> word;
      if (word != "poly") throw std::invalid_argument(context + ": expected 'poly'");
      double u, v;
      while (in >> u >> v) p.polygon.emplace_back(u, v);
      spec.planes.push_back(std::move(p));
      continue;
    } else {
      throw std::invalid_argument(context + ": unknown keyword '" + keyword + "'");
    }
    if (in.fail()) throw std::invalid_argument(context + ": malformed values");
  }
  for (const PendingCamera& c : cameras) {
    spec.cameras.push_back(MakeCamera(c.fx, c.fy, c.cx, c.cy, spec.width,
                                      spec.height, c.eye, c.target));
  }
  if (spec.cameras.empty()) throw std::invalid_argument("scene: no cameras");
  spec = NormalizeToFirstCamera(spec);
  spec.Validate();
  return spec;
}

SceneSpec ReadSceneFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scene file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  SceneSpec spec = ParseScene(buffer.str());
  if (spec.name.empty()) spec.name = path;
  return spec;
}

SceneSpec LoadScene(const std::string& name_or_path) {
  for (const std::string& name : CorpusNames()) {
    if (name == name_or_path) return CorpusScene(name);
  }
  return ReadSceneFile(name_or_path);
}

}  // namespace dpe
