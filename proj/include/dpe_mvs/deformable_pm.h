#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dpe_mvs/edge_cues.h"
#include "dpe_mvs/patch_match.h"
#include "dpe_mvs/planar_model.h"

namespace dpe {

struct DeformableConfig {
  double lambda = 0.5;  // center patch weight
  double omega = 2.5;   // scale on anchor distances
  int fixed_radius = 5;
  int fixed_stride = 2;

  void Validate() const;
};

// lambda * center + (1 - lambda) * mean(anchor terms). Without a center
// term the anchor terms are averaged alone.
double CombineDeformableCost(std::optional<double> center,
                             std::span<const double> anchor_costs,
                             double lambda);

// Center patch radius for an unreliable pixel: the minimum of half the root
// triangle area, the scaled anchor distances and (outside stochastic areas)
// the edge distances; raised to the fixed radius when smaller, otherwise
// zero in stochastic areas.
int AdaptiveRadius(double triangle_area, std::span<const double> anchor_distances,
                   std::span<const int> fine_distances,
                   std::span<const int> coarse_distances, int fixed_radius,
                   double omega, bool stochastic, bool low_texture);

double TriangleArea(const Eigen::Vector2i& a, const Eigen::Vector2i& b,
                    const Eigen::Vector2i& c);

// Stride that keeps the sample count of an enlarged patch bounded.
int EnlargedStride(int radius);

PatchSpec AdaptivePatchRadius(const Eigen::Vector2i& p, const AnchorSet& anchors,
                              const EdgeCues& cues, const DeformableConfig& config,
                              bool stochastic, bool low_texture);

// Evaluates hypotheses at p with the deformable patch: the center patch of
// `center` (skipped when its radius is 0) plus fixed-size anchor patches,
// all warped by the plane of the hypothesis anchored at p.
class DeformableEvaluator {
 public:
  DeformableEvaluator(const MatchContext& context, const SceneState& state,
                      const PatchSpec& center, const AnchorSet& anchors,
                      const DeformableConfig& deformable,
                      const MatchConfig& match);

  double Evaluate(const PlaneHypothesis& hyp) const;

 private:
  const MatchContext& context_;
  Eigen::Vector2i pixel_;
  std::optional<RefPatch> center_;
  std::vector<RefPatch> anchor_patches_;
  std::array<double, kMaxSourceViews> weights_{};
  double lambda_;
};

double DeformableCost(const MatchContext& context, const SceneState& state,
                      const Eigen::Vector2i& p, const PlaneHypothesis& hyp,
                      const AnchorSet& anchors, const PatchSpec& center,
                      const DeformableConfig& deformable,
                      const MatchConfig& match);

// Each anchor's current hypothesis re-expressed at p, then the anchor plane
// at p. Candidates that cannot be formed at p are skipped.
std::vector<PlaneHypothesis> DeformablePropagation(const Eigen::Vector2i& p,
                                                   const AnchorSet& anchors,
                                                   const SceneState& state,
                                                   const CameraModel& camera);

// Refits the anchor plane through the defining triple's current hypotheses.
void RefreshAnchorPlane(AnchorSet& anchors, const SceneState& state,
                        const CameraModel& camera);

struct DeformablePixel {
  Eigen::Vector2i pixel;
  AnchorSet anchors;
  PatchSpec center;
};

// One deformable sweep over the pixels of `color` in `pixels`. `cost` holds
// each pixel's current deformable cost and only ever decreases. Refinement
// draws come from a per-pixel generator derived from `seed`.
int DeformableSweep(SceneState& state, Grid<double>& cost,
                    std::span<const DeformablePixel> pixels, Color color,
                    const MatchContext& context,
                    const DeformableConfig& deformable,
                    const MatchConfig& match, uint64_t seed);

}  // namespace dpe
