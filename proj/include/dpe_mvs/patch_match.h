#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dpe_mvs/geometry.h"
#include "dpe_mvs/image.h"
#include "dpe_mvs/random.h"

namespace dpe {

inline constexpr int kMaxSourceViews = 8;
inline constexpr int kMaxPatchSamples = 256;
// Cost assigned to degenerate, out-of-bounds or textureless matches.
inline constexpr double kMaxCost = 2.0;

struct MatchConfig {
  int patch_radius = 5;
  int patch_stride = 2;
  double reliability_tau_cost = 0.25;
  int iterations = 3;
  // Gaussian view weighting exp(-m^2 / (2 * weight_variance)).
  double weight_variance = 0.36;
  double consistency_rel_tol = 0.01;
  double refine_depth_fraction = 0.05;
  double refine_normal_degrees = 10.0;

  void Validate() const;
};

struct PatchSpec {
  Eigen::Vector2i center = Eigen::Vector2i::Zero();
  int radius = 5;  // 0 means the center patch is discarded
  int stride = 2;
};

using ViewCostArray = std::array<float, kMaxSourceViews>;

struct SceneState {
  DepthMap depth;
  NormalMap normal;  // camera frame
  Grid<double> cost;
  Mask reliable;
  Grid<ViewCostArray> view_cost;  // last per-source-view costs
  int num_sources = 0;
  bool weights_ready = false;  // false until per-view costs come from a sweep

  SceneState() = default;
  SceneState(int width, int height, int num_sources);

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }

  PlaneHypothesis Hypothesis(const Eigen::Vector2i& p) const {
    return {normal(p), depth(p)};
  }
  void SetHypothesis(const Eigen::Vector2i& p, const PlaneHypothesis& hyp) {
    depth(p) = hyp.depth;
    normal(p) = hyp.normal;
  }
};

// 1 - NCC of two equally sized sample sets, clamped to [0, 2]. Either set
// with variance below 1e-8 yields the maximum cost. Throws
// std::invalid_argument on a size mismatch or fewer than 9 samples.
double NccCost(std::span<const float> ref, std::span<const float> src);

inline double ViewWeight(double view_cost, double variance = 0.36) {
  return std::exp(-view_cost * view_cost / (2.0 * variance));
}

// Reference-image samples of one patch, mean-centered.
struct RefPatch {
  std::array<float, kMaxPatchSamples> centered{};
  std::array<float, kMaxPatchSamples> x{};
  std::array<float, kMaxPatchSamples> y{};
  int count = 0;
  double sum_sq = 0.0;  // sum of squared centered values
  bool textured = false;
};

using HomographySet = std::array<std::optional<Eigen::Matrix3d>, kMaxSourceViews>;

// Reference view plus its source views for one pyramid level.
class MatchContext {
 public:
  struct Source {
    const GrayImage* image;
    CameraModel camera;
  };

  MatchContext(const GrayImage& ref_image, const CameraModel& ref_camera,
               std::vector<Source> sources, double depth_min, double depth_max);

  const GrayImage& image() const { return *ref_image_; }
  const CameraModel& camera() const { return ref_camera_; }
  int num_sources() const { return static_cast<int>(sources_.size()); }
  double depth_min() const { return depth_min_; }
  double depth_max() const { return depth_max_; }

  RefPatch ExtractRefPatch(const PatchSpec& spec) const;
  HomographySet Homographies(const Eigen::Vector2i& anchor,
                             const PlaneHypothesis& hyp) const;
  // Per-source costs of a patch warped by precomputed homographies.
  void PatchViewCosts(const RefPatch& patch, const HomographySet& homographies,
                      float* view_costs) const;
  // Weighted mean of the per-view costs.
  double Aggregate(const float* view_costs, const double* weights) const;

 private:
  const GrayImage* ref_image_;
  CameraModel ref_camera_;
  std::vector<Source> sources_;
  std::vector<ViewPairGeometry> pairs_;
  double depth_min_;
  double depth_max_;
};

// Fills `weights` from previous per-view costs, or uniform before the first
// sweep.
void ViewWeights(const SceneState& state, const Eigen::Vector2i& p,
                 const MatchConfig& config, double* weights);

// Evaluates plane hypotheses at one pixel with that pixel's view weights.
class PixelEvaluator {
 public:
  PixelEvaluator(const MatchContext& context, const SceneState& state,
                 const PatchSpec& spec, const MatchConfig& config);

  const Eigen::Vector2i& pixel() const { return spec_.center; }
  double Evaluate(const PlaneHypothesis& hyp, float* view_costs) const;
  double Evaluate(const PlaneHypothesis& hyp) const {
    ViewCostArray unused;
    return Evaluate(hyp, unused.data());
  }

 private:
  const MatchContext& context_;
  PatchSpec spec_;
  RefPatch patch_;
  std::array<double, kMaxSourceViews> weights_{};
};

// Aggregated multi-view cost of `hyp` at the patch center with explicit view
// weights (null = uniform).
double MultiViewCost(const MatchContext& context, const PlaneHypothesis& hyp,
                     const PatchSpec& spec, const double* weights = nullptr,
                     float* view_costs = nullptr);

struct Candidate {
  PlaneHypothesis hyp;
  double cost = std::nan("");  // NaN = not yet evaluated
  ViewCostArray view_costs{};
};

// Supplies candidates for pixel p; may pre-evaluate them with `evaluator`.
using Sampler = std::function<void(const Eigen::Vector2i& p,
                                   const SceneState& state,
                                   const PixelEvaluator& evaluator,
                                   std::vector<Candidate>& out)>;
using PixelFilter = std::function<bool(const Eigen::Vector2i& p)>;

enum class Color : int { kRed = 0, kBlack = 1 };
inline Color ColorOf(const Eigen::Vector2i& p) {
  return static_cast<Color>((p.x() + p.y()) & 1);
}

// Updates every pixel of `color` accepted by `filter` to the argmin over its
// incumbent and the sampled candidates. Returns the number of updates.
int CheckerboardSweep(SceneState& state, Color color, const Sampler& sampler,
                      const MatchContext& context, const MatchConfig& config,
                      const PixelFilter& filter = {});

void RandomInit(SceneState& state, const CameraModel& camera, double depth_min,
                double depth_max, uint64_t seed);

PlaneHypothesis RandomHypothesis(Rng& rng, const Eigen::Vector3d& ray,
                                 double depth_min, double depth_max);

// Six candidates: perturbed depth, perturbed normal, random, and their
// cross-combinations.
std::array<PlaneHypothesis, 6> Refine(const Eigen::Vector2i& p,
                                      const PlaneHypothesis& hyp, Rng& rng,
                                      const CameraModel& camera,
                                      double depth_min, double depth_max,
                                      const MatchConfig& config);

// Recomputes cost and per-view costs of every pixel accepted by `filter`
// at the fixed patch size.
void EvaluateState(SceneState& state, const MatchContext& context,
                   const MatchConfig& config, const PixelFilter& filter = {});

struct ConsistencyView {
  const CameraModel* camera;
  const DepthMap* depth;
};

// True when the 3D point of `hyp` at p agrees with the depth map of at least
// one other view within `rel_tol`.
bool GeometricallyConsistent(const Eigen::Vector2i& p, double depth,
                             const CameraModel& camera,
                             std::span<const ConsistencyView> others,
                             double rel_tol);

Mask ClassifyReliability(const SceneState& state, const CameraModel& camera,
                         std::span<const ConsistencyView> others,
                         const MatchConfig& config);

PatchSpec FixedPatch(const Eigen::Vector2i& p, const MatchConfig& config);

}  // namespace dpe
