#include "dpe_mvs/deformable_pm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpe {

void DeformableConfig::Validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0) || !(omega > 0.0)) {
    throw std::invalid_argument("DeformableConfig: invalid lambda or omega");
  }
  if (fixed_radius < 2 || fixed_stride < 1) {
    throw std::invalid_argument("DeformableConfig: invalid fixed patch");
  }
}

double CombineDeformableCost(std::optional<double> center,
                             std::span<const double> anchor_costs,
                             double lambda) {
  if (anchor_costs.empty()) {
    throw std::invalid_argument("CombineDeformableCost: no anchors");
  }
  double sum = 0.0;
  for (double c : anchor_costs) sum += c;
  const double anchor_mean = sum / static_cast<double>(anchor_costs.size());
  if (!center) return anchor_mean;
  return lambda * *center + (1.0 - lambda) * anchor_mean;
}

int AdaptiveRadius(double triangle_area, std::span<const double> anchor_distances,
                   std::span<const int> fine_distances,
                   std::span<const int> coarse_distances, int fixed_radius,
                   double omega, bool stochastic, bool low_texture) {
  double gamma = std::floor(std::sqrt(std::max(0.0, triangle_area)) / 2.0);
  for (double d : anchor_distances) gamma = std::min(gamma, omega * d);
  if (!stochastic) {
    for (int d : fine_distances) gamma = std::min(gamma, static_cast<double>(d));
    if (low_texture) {
      for (int d : coarse_distances) gamma = std::min(gamma, static_cast<double>(d));
    }
  }
  const int radius = static_cast<int>(std::floor(gamma));
  if (fixed_radius > radius) return fixed_radius;
  if (stochastic) return 0;
  return radius;
}

double TriangleArea(const Eigen::Vector2i& a, const Eigen::Vector2i& b,
                    const Eigen::Vector2i& c) {
  const double cross = static_cast<double>(b.x() - a.x()) * (c.y() - a.y()) -
                       static_cast<double>(c.x() - a.x()) * (b.y() - a.y());
  return 0.5 * std::abs(cross);
}

int EnlargedStride(int radius) {
  return std::max(1, (radius + 4) / 5 * 2);
}

PatchSpec AdaptivePatchRadius(const Eigen::Vector2i& p, const AnchorSet& anchors,
                              const EdgeCues& cues, const DeformableConfig& config,
                              bool stochastic, bool low_texture) {
  const auto& t = anchors.defining_triple;
  std::array<double, 3> anchor_distances;
  for (int i = 0; i < 3; ++i) {
    anchor_distances[i] = (t[i] - p).cast<double>().norm();
  }
  std::array<int, 8> fine, coarse;
  for (int k = 0; k < 8; ++k) {
    fine[k] = EdgeDistance(p, kAllDirections[k], cues.fine);
    coarse[k] = RegionBoundary(p, kAllDirections[k], cues.regions);
  }
  const int radius = AdaptiveRadius(TriangleArea(t[0], t[1], t[2]),
                                    anchor_distances, fine, coarse,
                                    config.fixed_radius, config.omega,
                                    stochastic, low_texture);
  const int stride =
      radius == config.fixed_radius ? config.fixed_stride : EnlargedStride(radius);
  return {p, radius, stride};
}

DeformableEvaluator::DeformableEvaluator(const MatchContext& context,
                                         const SceneState& state,
                                         const PatchSpec& center,
                                         const AnchorSet& anchors,
                                         const DeformableConfig& deformable,
                                         const MatchConfig& match)
    : context_(context), pixel_(center.center), lambda_(deformable.lambda) {
  if (anchors.anchors.empty()) {
    throw std::invalid_argument("DeformableEvaluator: empty anchor set");
  }
  if (center.radius > 0) center_ = context.ExtractRefPatch(center);
  anchor_patches_.reserve(anchors.anchors.size());
  for (const Anchor& a : anchors.anchors) {
    anchor_patches_.push_back(context.ExtractRefPatch(
        {a.pixel, deformable.fixed_radius, deformable.fixed_stride}));
  }
  ViewWeights(state, pixel_, match, weights_.data());
}

double DeformableEvaluator::Evaluate(const PlaneHypothesis& hyp) const {
  const HomographySet hs = context_.Homographies(pixel_, hyp);
  ViewCostArray view_costs;
  std::array<double, 64> anchor_costs;
  const size_t n = std::min(anchor_patches_.size(), anchor_costs.size());
  for (size_t i = 0; i < n; ++i) {
    context_.PatchViewCosts(anchor_patches_[i], hs, view_costs.data());
    anchor_costs[i] = context_.Aggregate(view_costs.data(), weights_.data());
  }
  std::optional<double> center;
  if (center_) {
    context_.PatchViewCosts(*center_, hs, view_costs.data());
    center = context_.Aggregate(view_costs.data(), weights_.data());
  }
  return CombineDeformableCost(center, std::span(anchor_costs.data(), n), lambda_);
}

double DeformableCost(const MatchContext& context, const SceneState& state,
                      const Eigen::Vector2i& p, const PlaneHypothesis& hyp,
                      const AnchorSet& anchors, const PatchSpec& center,
                      const DeformableConfig& deformable,
                      const MatchConfig& match) {
  PatchSpec spec = center;
  spec.center = p;
  return DeformableEvaluator(context, state, spec, anchors, deformable, match)
      .Evaluate(hyp);
}

std::vector<PlaneHypothesis> DeformablePropagation(const Eigen::Vector2i& p,
                                                   const AnchorSet& anchors,
                                                   const SceneState& state,
                                                   const CameraModel& camera) {
  std::vector<PlaneHypothesis> out;
  const Eigen::Vector2d to = p.cast<double>();
  for (const Anchor& a : anchors.anchors) {
    const auto hyp = TransferHypothesis(state.Hypothesis(a.pixel),
                                        a.pixel.cast<double>(), to, camera);
    if (hyp) out.push_back(*hyp);
  }
  if (const auto hyp = TryHypothesisFromPlane(anchors.plane, to, camera)) {
    out.push_back(*hyp);
  }
  return out;
}

void RefreshAnchorPlane(AnchorSet& anchors, const SceneState& state,
                        const CameraModel& camera) {
  std::array<Eigen::Vector3d, 3> points;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2i& q = anchors.defining_triple[i];
    const double d = state.depth(q);
    if (!(d > 0.0)) return;
    points[i] = Unproject(q.cast<double>(), d, camera);
  }
  if (auto plane = TryPlaneFromThreePoints(points[0], points[1], points[2])) {
    plane->inliers = std::move(anchors.plane.inliers);
    plane->anchors = std::move(anchors.plane.anchors);
    anchors.plane = std::move(*plane);
  }
}

int DeformableSweep(SceneState& state, Grid<double>& cost,
                    std::span<const DeformablePixel> pixels, Color color,
                    const MatchContext& context,
                    const DeformableConfig& deformable,
                    const MatchConfig& match, uint64_t seed) {
  int updates = 0;
  for (const DeformablePixel& entry : pixels) {
    const Eigen::Vector2i& p = entry.pixel;
    if (ColorOf(p) != color) continue;
    const DeformableEvaluator evaluator(context, state, entry.center,
                                        entry.anchors, deformable, match);
    const PlaneHypothesis incumbent = state.Hypothesis(p);
    if (std::isnan(cost(p))) cost(p) = evaluator.Evaluate(incumbent);

    std::vector<PlaneHypothesis> candidates =
        DeformablePropagation(p, entry.anchors, state, context.camera());
    Rng rng = MakeRng(seed, {static_cast<uint64_t>(state.depth.Index(p.x(), p.y()))});
    for (const PlaneHypothesis& h :
         Refine(p, incumbent, rng, context.camera(), context.depth_min(),
                context.depth_max(), match)) {
      candidates.push_back(h);
    }
    double best_cost = cost(p);
    int best = -1;
    for (size_t i = 0; i < candidates.size(); ++i) {
      const PlaneHypothesis& h = candidates[i];
      if (!(h.depth >= context.depth_min() && h.depth <= context.depth_max())) {
        continue;
      }
      const double c = evaluator.Evaluate(h);
      if (c < best_cost) {
        best_cost = c;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      state.SetHypothesis(p, candidates[best]);
      cost(p) = best_cost;
      ++updates;
    }
  }
  return updates;
}

}  // namespace dpe
