#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dpe_mvs/image.h"

namespace dpe {

// The eight ray directions in image coordinates (y grows downward).
enum class Direction : int { kN = 0, kNE, kE, kSE, kS, kSW, kW, kNW };

inline constexpr std::array<Direction, 8> kAllDirections = {
    Direction::kN, Direction::kNE, Direction::kE, Direction::kSE,
    Direction::kS, Direction::kSW, Direction::kW, Direction::kNW};

inline Eigen::Vector2i DirectionStep(Direction d) {
  static constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  static constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
  const int i = static_cast<int>(d);
  return {kDx[i], kDy[i]};
}

inline Direction Opposite(Direction d) {
  return static_cast<Direction>((static_cast<int>(d) + 4) % 8);
}

struct TextureConfig {
  double sigma = 0.67;  // Canny threshold spread around the median
  double alpha = 0.5;   // fine vs coarse weight in the edge density
  double beta1 = 25.0;  // sigmoid steepness
  double beta2 = 0.35;  // sigmoid midpoint
  int window = 11;      // density window side, equal to the fixed patch side

  void Validate() const;
};

struct CoarseEdgeConfig {
  double roberts_fraction = 0.15;  // of the image's max Roberts magnitude
  double min_gradient = 10.0;      // absolute floor on the Roberts threshold
  int min_votes = 30;
  int vote_divisor = 8;            // votes >= max(min_votes, short_side / divisor)
  int max_gap = 5;                 // gap linking along a detected line
  int min_segment_length = 15;
  int peak_radius = 2;             // non-max suppression in (rho, theta) bins
};

// Canny detector with hysteresis thresholds median * (1 -/+ sigma).
Mask ExtractFineEdges(const GrayImage& image, double sigma);

// Roberts cross magnitude followed by Hough line detection; the output
// contains only rasterized line segments supported by Roberts edges.
Mask ExtractCoarseEdges(const GrayImage& image,
                        const CoarseEdgeConfig& config = {});

struct Regions {
  LabelMap labels;                   // 0 on coarse-edge pixels
  std::vector<int64_t> sizes;        // indexed by label, sizes[0] = edge count
  std::vector<uint8_t> low_texture;  // indexed by label
  int count = 0;                     // labels run 1..count
};

// Pixel-count threshold for a low-textured region at pyramid level `level`
// (1 = full resolution) of an image with `image_area` full-resolution pixels.
double LowTextureThreshold(int level, int64_t image_area);

// 4-connected components of the non-edge pixels.
Regions SegmentRegions(const Mask& coarse, int level, int64_t image_area);

// Steps from `p` along `direction` to the first set mask pixel; the last
// in-image pixel stands in for an edge when the ray leaves the image.
int EdgeDistance(const Eigen::Vector2i& p, Direction direction,
                 const Mask& mask);

// Weighted fine/coarse edge density in the window around `p`, normalized
// by the window area after clipping to the image.
double EdgeDensity(const Eigen::Vector2i& p, const Mask& fine,
                   const Mask& coarse, const TextureConfig& config);
double StochasticProbabilityFromDensity(double density,
                                        const TextureConfig& config);
double StochasticProbability(const Eigen::Vector2i& p, const Mask& fine,
                             const Mask& coarse, const TextureConfig& config);
inline bool IsStochastic(double probability, double draw) {
  return draw < probability;
}

struct EdgeCues {
  Mask fine;
  Mask coarse;
  Regions regions;
  Grid<float> stochastic_prob;
  Mask stochastic;  // per-pixel draw against stochastic_prob, cached per level

  int width() const { return fine.width(); }
  int height() const { return fine.height(); }
  bool IsLowTexture(const Eigen::Vector2i& p) const {
    const int label = regions.labels(p);
    return label > 0 && regions.low_texture[label];
  }
};

EdgeCues ExtractEdgeCues(const GrayImage& image, int level, int64_t image_area,
                         const TextureConfig& texture,
                         const CoarseEdgeConfig& coarse, uint64_t seed);

}  // namespace dpe
