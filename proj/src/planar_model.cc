#include "dpe_mvs/planar_model.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dpe_mvs/raster.h"

namespace dpe {
namespace {

constexpr int kC2Attempts = 10;

constexpr std::array<std::pair<Direction, Direction>, 4> kDirectionPairs = {{
    {Direction::kN, Direction::kS},
    {Direction::kNE, Direction::kSW},
    {Direction::kE, Direction::kW},
    {Direction::kSE, Direction::kNW},
}};

int SectorOf(double dx, double dy, int phi) {
  double angle = std::atan2(dy, dx);
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  const int s = static_cast<int>(angle / (2.0 * std::numbers::pi / phi));
  return std::min(s, phi - 1);
}

// Lazily filled symmetric table of pairwise fine-edge crossings.
class CrossingTable {
 public:
  CrossingTable(std::span<const AnchorCandidate> candidates, const Mask& fine)
      : candidates_(candidates),
        fine_(fine),
        n_(static_cast<int>(candidates.size())),
        table_(static_cast<size_t>(n_) * n_, -1) {}

  bool Crosses(int i, int j) {
    int8_t& entry = table_[static_cast<size_t>(i) * n_ + j];
    if (entry < 0) {
      entry = SegmentCrossesEdge(candidates_[i].pixel, candidates_[j].pixel,
                                 fine_)
                  ? 1
                  : 0;
      table_[static_cast<size_t>(j) * n_ + i] = entry;
    }
    return entry == 1;
  }

 private:
  std::span<const AnchorCandidate> candidates_;
  const Mask& fine_;
  int n_;
  std::vector<int8_t> table_;
};

}  // namespace

void SearchConfig::Validate() const {
  if (eta < 1 || phi < 3 || anchor_cap < 3 || anchor_cap > 64 ||
      ransac_iters < 1) {
    throw std::invalid_argument("SearchConfig: invalid counts");
  }
  if (!(tau > 0.0 && tau < 1.0) || !(epsilon > 0.0)) {
    throw std::invalid_argument("SearchConfig: invalid thresholds");
  }
  if (constrained_fraction < 0.0 || constrained_fraction > 1.0) {
    throw std::invalid_argument("SearchConfig: invalid constrained fraction");
  }
}

int RegionBoundary(const Eigen::Vector2i& p, Direction direction,
                   const Regions& regions) {
  const int label = regions.labels(p);
  const Eigen::Vector2i step = DirectionStep(direction);
  Eigen::Vector2i q = p;
  for (int k = 1;; ++k) {
    q += step;
    if (!regions.labels.Contains(q)) return k - 1;
    if (regions.labels(q) != label) return k;
  }
}

std::pair<int, int> AllocateSearch(int d_a, int d_b, int eta) {
  if (eta < 1 || d_a < 0 || d_b < 0) {
    throw std::invalid_argument("AllocateSearch: invalid input");
  }
  const int total = 2 * eta;
  if (d_a + d_b == 0) return {eta, eta};
  const int n_a = std::clamp(
      static_cast<int>(std::floor(static_cast<double>(total) * d_a / (d_a + d_b))),
      1, total - 1);
  return {n_a, total - n_a};
}

NearestReliableMap::NearestReliableMap(const Mask& reliable)
    : site_(reliable.width(), reliable.height(), -1),
      distance_(reliable.width(), reliable.height(),
                std::numeric_limits<int>::max()) {
  std::deque<int> queue;
  const int w = reliable.width(), h = reliable.height();
  for (int i = 0; i < w * h; ++i) {
    if (reliable.data()[i]) {
      site_.data()[i] = i;
      distance_.data()[i] = 0;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    const int x = i % w, y = i / w;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) {
          continue;
        }
        const int j = ny * w + nx;
        if (distance_.data()[j] != std::numeric_limits<int>::max()) continue;
        distance_.data()[j] = distance_.data()[i] + 1;
        site_.data()[j] = site_.data()[i];
        queue.push_back(j);
      }
    }
  }
}

std::optional<Eigen::Vector2i> NearestReliableMap::Nearest(
    const Eigen::Vector2i& q, int cap) const {
  if (!site_.Contains(q) || site_(q) < 0 || distance_(q) > cap) {
    return std::nullopt;
  }
  const int s = site_(q);
  return Eigen::Vector2i(s % site_.width(), s / site_.width());
}

ReliableIndex::ReliableIndex(const Mask& reliable)
    : width_(reliable.width()),
      height_(reliable.height()),
      next_right_(reliable.width(), reliable.height(), reliable.width()),
      next_left_(reliable.width(), reliable.height(), -1) {
  for (int y = 0; y < height_; ++y) {
    int last = -1;
    for (int x = 0; x < width_; ++x) {
      if (reliable(x, y)) last = x;
      next_left_(x, y) = last;
    }
    last = width_;
    for (int x = width_ - 1; x >= 0; --x) {
      if (reliable(x, y)) last = x;
      next_right_(x, y) = last;
    }
  }
}

std::vector<Eigen::Vector2i> ReliableIndex::SectorSearch(
    const Eigen::Vector2i& p, int phi) const {
  if (phi < 3) throw std::invalid_argument("SectorSearch: phi < 3");
  const double sector_width = 2.0 * std::numbers::pi / phi;
  std::vector<Eigen::Vector2i> out;

  for (int s = 0; s < phi; ++s) {
    // The sector is the wedge {v : cross(d1, v) >= 0, cross(d2, v) < 0},
    // which is convex because phi >= 3. Each row meets it in an interval;
    // the interval is widened by a pixel and members are confirmed with
    // SectorOf, so rounding never drops a pixel.
    const Eigen::Vector2d d1(std::cos(s * sector_width), std::sin(s * sector_width));
    const Eigen::Vector2d d2(std::cos((s + 1) * sector_width),
                             std::sin((s + 1) * sector_width));
    constexpr double kFar = 1e9;
    auto row_interval = [&](int dy, int* lo, int* hi) {
      double a = -kFar, b = kFar;
      // cross(d1, v) = d1.x * dy - d1.y * dx >= 0
      if (d1.y() > 0.0) b = std::min(b, d1.x() * dy / d1.y());
      else if (d1.y() < 0.0) a = std::max(a, d1.x() * dy / d1.y());
      else if (d1.x() * dy < 0.0) return false;
      // cross(d2, v) = d2.x * dy - d2.y * dx < 0
      if (d2.y() > 0.0) a = std::max(a, d2.x() * dy / d2.y());
      else if (d2.y() < 0.0) b = std::min(b, d2.x() * dy / d2.y());
      else if (d2.x() * dy > 0.0) return false;
      a = std::clamp(a, -kFar, kFar);
      b = std::clamp(b, -kFar, kFar);
      if (a > b + 2.0) return false;
      *lo = std::max(0, static_cast<int>(std::max(std::ceil(a) - 1.0, -1.0 * width_)) + p.x());
      *hi = std::min(width_ - 1,
                     static_cast<int>(std::min(std::floor(b) + 1.0, 2.0 * width_)) + p.x());
      return *lo <= *hi;
    };

    int64_t best_d2 = std::numeric_limits<int64_t>::max();
    int best_index = std::numeric_limits<int>::max();
    Eigen::Vector2i best_pixel;
    auto consider = [&](int x, int y) {
      const int64_t dx = x - p.x(), dy = y - p.y();
      if (dx == 0 && dy == 0) return false;
      if (SectorOf(static_cast<double>(dx), static_cast<double>(dy), phi) != s) {
        return false;
      }
      const int64_t d2 = dx * dx + dy * dy;
      const int index = y * width_ + x;
      if (d2 < best_d2 || (d2 == best_d2 && index < best_index)) {
        best_d2 = d2;
        best_index = index;
        best_pixel = {x, y};
      }
      return true;
    };
    auto within = [&](int x, int dy) {
      const int64_t dx = x - p.x();
      return dx * dx + static_cast<int64_t>(dy) * dy <= best_d2;
    };
    // Walks outward from `start` along the row and stops at the first
    // reliable pixel of this sector, which is the closest on that side.
    auto scan_right = [&](int y, int dy, int start, int hi) {
      for (int x = start <= hi ? next_right_(start, y) : width_;
           x <= hi && within(x, dy);
           x = x + 1 <= hi ? next_right_(x + 1, y) : width_) {
        if (consider(x, y)) return;
      }
    };
    auto scan_left = [&](int y, int dy, int start, int lo) {
      for (int x = start >= lo ? next_left_(start, y) : -1;
           x >= lo && within(x, dy);
           x = x - 1 >= lo ? next_left_(x - 1, y) : -1) {
        if (consider(x, y)) return;
      }
    };

    for (int direction : {1, -1}) {
      for (int dy = direction > 0 ? 0 : -1;; dy += direction) {
        const int y = p.y() + dy;
        if (y < 0 || y >= height_) break;
        if (static_cast<int64_t>(dy) * dy > best_d2) break;
        int lo, hi;
        // Rows meeting the (widened) wedge inside the image are contiguous.
        if (!row_interval(dy, &lo, &hi)) break;
        if (lo > p.x()) {
          scan_right(y, dy, lo, hi);
        } else if (hi < p.x()) {
          scan_left(y, dy, hi, lo);
        } else {
          scan_right(y, dy, p.x(), hi);
          scan_left(y, dy, p.x(), lo);
        }
      }
    }
    if (best_d2 != std::numeric_limits<int64_t>::max()) out.push_back(best_pixel);
  }
  return out;
}

std::vector<Eigen::Vector2i> SectorSearch(const Eigen::Vector2i& p,
                                          const Mask& reliable, int phi) {
  return ReliableIndex(reliable).SectorSearch(p, phi);
}

std::vector<Eigen::Vector2i> ExtendedSearch(const Eigen::Vector2i& p,
                                            const EdgeCues& cues,
                                            const NearestReliableMap& nearest,
                                            const SearchConfig& config) {
  std::vector<Eigen::Vector2i> out;
  if (!cues.IsLowTexture(p)) return out;
  auto visit = [&](Direction dir, int n, int boundary) {
    const Eigen::Vector2i step = DirectionStep(dir);
    for (int k = 1; k <= n; ++k) {
      const int dist = std::max(
          1, static_cast<int>(std::lround(static_cast<double>(k) * (boundary - 1) / n)));
      const Eigen::Vector2i waypoint = p + dist * step;
      const auto q = nearest.Nearest(waypoint, std::max(boundary, 1));
      if (q && std::find(out.begin(), out.end(), *q) == out.end()) {
        out.push_back(*q);
      }
    }
  };
  for (const auto& [a, b] : kDirectionPairs) {
    const int d_a = RegionBoundary(p, a, cues.regions);
    const int d_b = RegionBoundary(p, b, cues.regions);
    const auto [n_a, n_b] = AllocateSearch(d_a, d_b, config.eta);
    visit(a, n_a, d_a);
    visit(b, n_b, d_b);
  }
  return out;
}

std::vector<AnchorCandidate> MakeAnchorCandidates(
    std::span<const Eigen::Vector2i> pixels, const SceneState& state,
    const CameraModel& camera) {
  std::vector<AnchorCandidate> out;
  out.reserve(pixels.size());
  for (const Eigen::Vector2i& q : pixels) {
    const PlaneHypothesis hyp = state.Hypothesis(q);
    if (!(hyp.depth > 0.0)) continue;
    out.push_back({q, hyp, Unproject(q.cast<double>(), hyp.depth, camera)});
  }
  return out;
}

bool SegmentCrossesEdge(const Eigen::Vector2i& a, const Eigen::Vector2i& b,
                        const Mask& fine) {
  bool crosses = false;
  RasterizeLine(a, b, [&](const Eigen::Vector2i& q) {
    if (q != a && q != b && fine.Contains(q) && fine(q)) crosses = true;
  });
  return crosses;
}

namespace {

double DepthResidual(const CameraPlane& plane, const AnchorCandidate& c,
                     const CameraModel& camera) {
  const auto d = TryDepthFromPlane(plane, c.pixel.cast<double>(), camera);
  if (!d || !(*d > 0.0)) return std::numeric_limits<double>::infinity();
  return std::abs(*d - c.hyp.depth);
}

}  // namespace

double PlaneResidual(const PlaneModel& plane, const AnchorCandidate& c,
                     const CameraModel& camera, bool optimized) {
  if (!optimized) return std::abs(plane.SignedDistance(c.point));
  return DepthResidual(ToCameraFrame(plane, camera), c, camera);
}

std::optional<RansacResult> ConstrainedRansac(
    const Eigen::Vector2i& p, double depth_p,
    std::span<const AnchorCandidate> candidates, const Mask& fine,
    const CameraModel& camera, const SearchConfig& config,
    const RansacOptions& options, Rng& rng) {
  const int n = static_cast<int>(candidates.size());
  if (n < 3) return std::nullopt;
  const bool check_edges = options.optimized && !options.stochastic;
  CrossingTable crossings(candidates, fine);

  std::optional<RansacResult> best;
  int best_inliers = -1;
  std::vector<double> residuals(n);

  auto admissible = [&](int i, int j, int k) {
    if (!check_edges) return true;
    return !crossings.Crosses(i, j) && !crossings.Crosses(i, k) &&
           !crossings.Crosses(j, k);
  };
  auto normals_agree = [&](int i, int j, int k) {
    const auto& a = candidates[i].hyp.normal;
    const auto& b = candidates[j].hyp.normal;
    const auto& c = candidates[k].hyp.normal;
    return a.dot(b) > config.tau && a.dot(c) > config.tau && b.dot(c) > config.tau;
  };
  auto evaluate = [&](int i, int j, int k) {
    if (!admissible(i, j, k)) return;
    const auto plane = TryPlaneFromThreePoints(
        candidates[i].point, candidates[j].point, candidates[k].point);
    if (!plane) return;
    const CameraPlane cam_plane = ToCameraFrame(*plane, camera);
    int inliers = 0;
    for (int c = 0; c < n; ++c) {
      residuals[c] = options.optimized
                         ? DepthResidual(cam_plane, candidates[c], camera)
                         : std::abs(plane->SignedDistance(candidates[c].point));
      if (residuals[c] < config.epsilon * candidates[c].hyp.depth) ++inliers;
    }
    if (inliers < best_inliers || (!options.optimized && inliers == best_inliers)) {
      return;
    }
    const auto d = TryDepthFromPlane(cam_plane, p.cast<double>(), camera);
    const double residual_at_p = d && *d > 0.0
                                     ? std::abs(*d - depth_p)
                                     : std::numeric_limits<double>::infinity();
    if (inliers == best_inliers && !(residual_at_p < best->residual_at_p)) return;
    best_inliers = inliers;
    best.emplace();
    best->plane = *plane;
    best->triple = {i, j, k};
    best->residuals = residuals;
    best->residual_at_p = residual_at_p;
    for (int c = 0; c < n; ++c) {
      if (residuals[c] < config.epsilon * candidates[c].hyp.depth) {
        best->plane.inliers.push_back(c);
      }
    }
  };

  const double triples = static_cast<double>(n) * (n - 1) * (n - 2) / 6.0;
  if (triples <= config.ransac_iters) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) evaluate(i, j, k);
      }
    }
  } else {
    const int constrained =
        options.optimized
            ? static_cast<int>(std::floor(config.constrained_fraction * config.ransac_iters))
            : 0;
    for (int it = 0; it < config.ransac_iters; ++it) {
      const int attempts = it < constrained ? kC2Attempts : 1;
      for (int a = 0; a < attempts; ++a) {
        const int i = UniformIndex(rng, n);
        int j = UniformIndex(rng, n - 1);
        if (j >= i) ++j;
        int k = UniformIndex(rng, n - 2);
        if (k >= std::min(i, j)) ++k;
        if (k >= std::max(i, j)) ++k;
        if (it < constrained && !normals_agree(i, j, k)) continue;
        evaluate(i, j, k);
        break;
      }
    }
  }
  return best;
}

std::optional<AnchorSet> SelectAnchors(const RansacResult& result,
                                       std::span<const AnchorCandidate> candidates,
                                       int image_width,
                                       const SearchConfig& config) {
  const auto& inliers = result.plane.inliers;
  if (inliers.size() < 3) return std::nullopt;
  AnchorSet set;
  set.plane = result.plane;
  for (int t = 0; t < 3; ++t) {
    const AnchorCandidate& c = candidates[result.triple[t]];
    set.defining_triple[t] = c.pixel;
    set.anchors.push_back({c.pixel, c.hyp});
  }
  std::vector<int> rest;
  for (int i : inliers) {
    if (i != result.triple[0] && i != result.triple[1] && i != result.triple[2]) {
      rest.push_back(i);
    }
  }
  auto index_of = [&](int i) {
    return candidates[i].pixel.y() * image_width + candidates[i].pixel.x();
  };
  std::sort(rest.begin(), rest.end(), [&](int a, int b) {
    if (result.residuals[a] != result.residuals[b]) {
      return result.residuals[a] < result.residuals[b];
    }
    return index_of(a) < index_of(b);
  });
  for (int i : rest) {
    if (static_cast<int>(set.anchors.size()) >= config.anchor_cap) break;
    set.anchors.push_back({candidates[i].pixel, candidates[i].hyp});
  }
  set.plane.anchors.clear();
  for (const Anchor& a : set.anchors) set.plane.anchors.push_back(a.pixel);
  return set;
}

}  // namespace dpe
