#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dpe_mvs/edge_cues.h"
#include "dpe_mvs/geometry.h"
#include "dpe_mvs/image.h"
#include "dpe_mvs/patch_match.h"
#include "dpe_mvs/random.h"

namespace dpe {

struct SearchConfig {
  int eta = 4;           // waypoints per direction pair = 2 * eta
  int phi = 8;           // sectors
  int anchor_cap = 8;    // |S|
  double epsilon = 0.005;  // inlier threshold, relative to depth
  double tau = 0.87;       // normal agreement for preferred triples
  int ransac_iters = 100;
  double constrained_fraction = 0.7;  // share of the budget that enforces tau

  void Validate() const;
};

// Distance from p along `direction` to the first pixel outside p's region;
// the last in-image pixel counts when the ray leaves the image.
int RegionBoundary(const Eigen::Vector2i& p, Direction direction,
                   const Regions& regions);

// Splits 2 * eta waypoints between two opposite directions in proportion to
// their boundary distances, keeping at least one on each side.
std::pair<int, int> AllocateSearch(int d_a, int d_b, int eta);

// Multi-source 8-connected breadth-first search from all reliable pixels:
// per pixel, the index of a reliable pixel at minimal Chebyshev distance.
class NearestReliableMap {
 public:
  explicit NearestReliableMap(const Mask& reliable);

  // Nearest reliable pixel to q if within Chebyshev distance `cap`.
  std::optional<Eigen::Vector2i> Nearest(const Eigen::Vector2i& q,
                                         int cap) const;

 private:
  Grid<int> site_;
  Grid<int> distance_;
};

// Per-row lookup of the nearest reliable pixel to the left and right of
// any position, for sector queries.
class ReliableIndex {
 public:
  explicit ReliableIndex(const Mask& reliable);

  // Per equal-angle sector around p, the reliable pixel at minimal Euclidean
  // distance (ties by pixel index). Sectors without one are skipped.
  std::vector<Eigen::Vector2i> SectorSearch(const Eigen::Vector2i& p,
                                            int phi) const;

 private:
  int width_, height_;
  Grid<int> next_right_;  // smallest reliable x' >= x in the row, or width
  Grid<int> next_left_;   // largest reliable x' <= x in the row, or -1
};

std::vector<Eigen::Vector2i> SectorSearch(const Eigen::Vector2i& p,
                                          const Mask& reliable, int phi);

// Equally spaced waypoints toward the region boundary in all 8 directions,
// each replaced by its nearest reliable pixel. Empty unless p is in a
// low-texture region.
std::vector<Eigen::Vector2i> ExtendedSearch(const Eigen::Vector2i& p,
                                            const EdgeCues& cues,
                                            const NearestReliableMap& nearest,
                                            const SearchConfig& config);

struct AnchorCandidate {
  Eigen::Vector2i pixel;
  PlaneHypothesis hyp;
  Eigen::Vector3d point;  // world point of hyp at pixel
};

std::vector<AnchorCandidate> MakeAnchorCandidates(
    std::span<const Eigen::Vector2i> pixels, const SceneState& state,
    const CameraModel& camera);

struct RansacOptions {
  bool optimized = true;   // depth residual + edge and normal conditions
  bool stochastic = false;  // disables the fine-edge crossing condition
};

struct RansacResult {
  PlaneModel plane;                 // inliers are candidate indices
  std::array<int, 3> triple{};      // defining candidate indices
  std::vector<double> residuals;    // per candidate
  double residual_at_p = 0.0;
};

// True when the 8-connected segment between a and b passes through a fine
// edge pixel (endpoints excluded).
bool SegmentCrossesEdge(const Eigen::Vector2i& a, const Eigen::Vector2i& b,
                        const Mask& fine);

// Residual of candidate c against `plane`: depth difference along the ray
// when optimized, point-to-plane distance otherwise.
double PlaneResidual(const PlaneModel& plane, const AnchorCandidate& c,
                     const CameraModel& camera, bool optimized);

// Enumerates every triple when C(n,3) <= ransac_iters, otherwise samples
// seeded triples. nullopt when no admissible triple exists.
std::optional<RansacResult> ConstrainedRansac(
    const Eigen::Vector2i& p, double depth_p,
    std::span<const AnchorCandidate> candidates, const Mask& fine,
    const CameraModel& camera, const SearchConfig& config,
    const RansacOptions& options, Rng& rng);

struct Anchor {
  Eigen::Vector2i pixel;
  PlaneHypothesis hyp;
};

struct AnchorSet {
  std::vector<Anchor> anchors;  // defining triple first
  std::array<Eigen::Vector2i, 3> defining_triple;
  PlaneModel plane;
};

// Defining triple followed by the remaining inliers by ascending residual
// (ties by pixel index), capped at anchor_cap. nullopt below 3 inliers.
std::optional<AnchorSet> SelectAnchors(const RansacResult& result,
                                       std::span<const AnchorCandidate> candidates,
                                       int image_width,
                                       const SearchConfig& config);

}  // namespace dpe
