#include "dpe_mvs/evaluation.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace dpe {
namespace {

struct CellKey {
  int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  size_t operator()(const CellKey& k) const {
    uint64_t h = static_cast<uint64_t>(k.x) * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<uint64_t>(k.y) * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
    h ^= static_cast<uint64_t>(k.z) * 0x165667b19e3779f9ULL + (h << 6) + (h >> 2);
    return static_cast<size_t>(h);
  }
};

CellKey KeyOf(const Eigen::Vector3d& p, double cell) {
  return {static_cast<int64_t>(std::floor(p.x() / cell)),
          static_cast<int64_t>(std::floor(p.y() / cell)),
          static_cast<int64_t>(std::floor(p.z() / cell))};
}

// Uniform grid with cell size equal to the query radius, so every neighbor
// within the radius lies in the 3x3x3 block around the query cell.
class RadiusIndex {
 public:
  RadiusIndex(const std::vector<Eigen::Vector3d>& points, double radius)
      : points_(points), radius_(radius) {
    cells_.reserve(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
      cells_[KeyOf(points[i], radius)].push_back(static_cast<int>(i));
    }
  }

  bool AnyWithin(const Eigen::Vector3d& q) const {
    const CellKey c = KeyOf(q, radius_);
    const double r2 = radius_ * radius_;
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (int i : it->second) {
            if ((points_[i] - q).squaredNorm() <= r2) return true;
          }
        }
      }
    }
    return false;
  }

 private:
  const std::vector<Eigen::Vector3d>& points_;
  double radius_;
  std::unordered_map<CellKey, std::vector<int>, CellHash> cells_;
};

double FractionWithin(const std::vector<Eigen::Vector3d>& queries,
                      const RadiusIndex& index) {
  if (queries.empty()) return 0.0;
  size_t hits = 0;
  for (const Eigen::Vector3d& q : queries) hits += index.AnyWithin(q) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

}  // namespace

const ThresholdScore& EvalReport::At(double threshold) const {
  for (const ThresholdScore& row : rows) {
    if (std::abs(row.threshold - threshold) <= 1e-12 * std::max(1.0, threshold)) {
      return row;
    }
  }
  throw std::out_of_range("EvalReport: no row for the requested threshold");
}

double F1Score(double accuracy, double completeness) {
  const double sum = accuracy + completeness;
  return sum > 0.0 ? 2.0 * accuracy * completeness / sum : 0.0;
}

EvalReport Evaluate(const PointCloud& cloud, const PointCloud& gt,
                    std::span<const double> thresholds) {
  EvalReport report;
  for (double t : thresholds) {
    if (!(t > 0.0)) throw std::invalid_argument("Evaluate: thresholds must be > 0");
    ThresholdScore row;
    row.threshold = t;
    if (!cloud.empty() && !gt.empty()) {
      row.accuracy = FractionWithin(cloud.positions, RadiusIndex(gt.positions, t));
      row.completeness = FractionWithin(gt.positions, RadiusIndex(cloud.positions, t));
    }
    row.f1 = F1Score(row.accuracy, row.completeness);
    report.rows.push_back(row);
  }
  return report;
}

PointCloud GroundTruthCloud(const RenderedScene& scene) {
  constexpr double kDedupCell = 1e-4;
  PointCloud cloud;
  std::unordered_set<CellKey, CellHash> seen;
  for (size_t v = 0; v < scene.views.size(); ++v) {
    const CameraModel& cam = scene.views[v].camera;
    const DepthMap& depth = scene.gt_depth[v];
    const Eigen::Matrix3d rt = cam.rotation.transpose();
    for (int y = 0; y < depth.height(); ++y) {
      for (int x = 0; x < depth.width(); ++x) {
        const double d = depth(x, y);
        if (!(d > 0.0)) continue;
        const Eigen::Vector3d p = Unproject({double(x), double(y)}, d, cam);
        if (!seen.insert(KeyOf(p, kDedupCell)).second) continue;
        cloud.positions.push_back(p);
        cloud.normals.push_back(rt * scene.gt_normal[v](x, y));
        cloud.gray.push_back(static_cast<uint8_t>(scene.views[v].image(x, y)));
      }
    }
  }
  return cloud;
}

double GroundTruthDepthRange(const RenderedScene& scene) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const DepthMap& depth : scene.gt_depth) {
    for (double d : depth.data()) {
      if (!(d > 0.0)) continue;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  return hi > lo ? hi - lo : 0.0;
}

double MeanAbsDepthError(const DepthMap& estimate, const DepthMap& gt,
                         const Mask& region) {
  if (!estimate.SameShape(gt) || !region.SameShape(gt)) {
    throw std::invalid_argument("MeanAbsDepthError: size mismatch");
  }
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < gt.size(); ++i) {
    if (!region.data()[i] || !(gt.data()[i] > 0.0)) continue;
    sum += std::abs(estimate.data()[i] - gt.data()[i]);
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

Mask DepthEdgeBand(const DepthMap& gt, double min_jump, int radius) {
  Mask edge(gt.width(), gt.height(), 0);
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (x + 1 < gt.width() && std::abs(gt(x, y) - gt(x + 1, y)) > min_jump) {
        edge(x, y) = edge(x + 1, y) = 1;
      }
      if (y + 1 < gt.height() && std::abs(gt(x, y) - gt(x, y + 1)) > min_jump) {
        edge(x, y) = edge(x, y + 1) = 1;
      }
    }
  }
  Mask band(gt.width(), gt.height(), 0);
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!edge(x, y)) continue;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (band.Contains(x + dx, y + dy)) band(x + dx, y + dy) = 1;
        }
      }
    }
  }
  return band;
}

double BandErrorFraction(const DepthMap& estimate, const DepthMap& gt,
                         const Mask& band, double max_error) {
  if (!estimate.SameShape(gt) || !band.SameShape(gt)) {
    throw std::invalid_argument("BandErrorFraction: size mismatch");
  }
  size_t total = 0, bad = 0;
  for (size_t i = 0; i < gt.size(); ++i) {
    if (!band.data()[i] || !(gt.data()[i] > 0.0)) continue;
    ++total;
    if (!(std::abs(estimate.data()[i] - gt.data()[i]) <= max_error)) ++bad;
  }
  return total ? static_cast<double>(bad) / static_cast<double>(total) : 0.0;
}

SceneRun RunScene(const RenderedScene& scene, const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  SceneRun run;
  run.result = RunPipeline(scene.views, config);
  run.cloud = Fuse(run.result.states, scene.views, config.fusion);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

std::vector<Toggles> AllToggleSets() {
  std::vector<Toggles> sets;
  for (int bits = 0; bits < 16; ++bits) {
    sets.push_back({(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0});
  }
  return sets;
}

std::vector<AblationRow> RunAblation(const RenderedScene& scene,
                                     const PipelineConfig& base,
                                     std::span<const Toggles> toggle_sets,
                                     std::span<const double> thresholds) {
  const PointCloud gt = GroundTruthCloud(scene);
  std::vector<AblationRow> rows;
  for (const Toggles& toggles : toggle_sets) {
    PipelineConfig config = base;
    config.toggles = toggles;
    const SceneRun run = RunScene(scene, config);
    rows.push_back({toggles, Evaluate(run.cloud, gt, thresholds), run.seconds});
  }
  return rows;
}

std::string FormatReport(const EvalReport& report) {
  std::ostringstream out;
  char line[128];
  out << "threshold   accuracy  completeness  f1\n";
  for (const ThresholdScore& r : report.rows) {
    std::snprintf(line, sizeof(line), "%-10.4g  %8.4f  %12.4f  %6.4f\n", r.threshold,
                  r.accuracy, r.completeness, r.f1);
    out << line;
  }
  return out.str();
}

std::string EvalReportCsv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "threshold,accuracy,completeness,f1\n";
  for (const ThresholdScore& r : report.rows) {
    out << r.threshold << ',' << r.accuracy << ',' << r.completeness << ',' << r.f1 << '\n';
  }
  return out.str();
}

std::string AblationTable(std::span<const AblationRow> rows) {
  std::ostringstream out;
  char line[160];
  for (const AblationRow& row : rows) {
    for (const ThresholdScore& r : row.report.rows) {
      std::snprintf(line, sizeof(line), "%-12s t=%-8.4g acc %.4f  comp %.4f  f1 %.4f  (%.1f s)\n",
                    row.toggles.Name().c_str(), r.threshold, r.accuracy, r.completeness,
                    r.f1, row.seconds);
      out << line;
    }
  }
  return out.str();
}

std::string AblationCsv(std::span<const AblationRow> rows) {
  std::ostringstream out;
  out.precision(10);
  out << "es,pe,po,aa,threshold,accuracy,completeness,f1,seconds\n";
  for (const AblationRow& row : rows) {
    for (const ThresholdScore& r : row.report.rows) {
      out << row.toggles.es << ',' << row.toggles.pe << ',' << row.toggles.po << ','
          << row.toggles.aa << ',' << r.threshold << ',' << r.accuracy << ','
          << r.completeness << ',' << r.f1 << ',' << row.seconds << '\n';
    }
  }
  return out.str();
}

}  // namespace dpe
