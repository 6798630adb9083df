#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "dpe_mvs/edge_cues.h"
#include "dpe_mvs/patch_match.h"

namespace dpe {

struct SamplingConfig {
  int base_count = 11;
  int base_step = 2;
  int k_min = 11;
  int k_max = 22;
  int level = 1;          // 1 = full resolution
  int image_width = 0;    // full-resolution width

  void Validate() const;
};

// Exclusion radius around p for iteration t_iter: max(1, 5 - 2 t_iter).
int ExclusionRadius(int t_iter);

struct ExtendedParams {
  int count = 0;
  int step = 1;
};

// Sample count and step of an edge-guided strip whose nearest fine edge is
// d_fe pixels away.
ExtendedParams ComputeExtendedParams(int d_fe, const SamplingConfig& config);

struct StripSample {
  Eigen::Vector2i source;
  PlaneHypothesis hyp;  // as stored at `source`
  double stored_cost = kMaxCost;
};

// One optional sample per direction, ordered as kAllDirections.
using StripSampleSet = std::array<std::optional<StripSample>, 8>;

// Positions of one strip: `count` samples starting at offset `start` with
// stride `step` along `direction`, moved onto the checkerboard color
// opposite to p and clipped to the image.
std::vector<Eigen::Vector2i> StripPositions(const Eigen::Vector2i& p,
                                            Direction direction, int start,
                                            int step, int count, int width,
                                            int height);

// Per-direction lowest-stored-cost sample over the given strip layout.
StripSampleSet SampleStrips(const Eigen::Vector2i& p, const SceneState& state,
                            const std::array<int, 8>& start,
                            const std::array<int, 8>& step,
                            const std::array<int, 8>& count);

StripSampleSet ProgressiveNonLocal(const Eigen::Vector2i& p,
                                   const SceneState& state, int t_iter,
                                   const SamplingConfig& config);

StripSampleSet EdgeGuided(const Eigen::Vector2i& p, const SceneState& state,
                          const Mask& fine, int t_iter,
                          const SamplingConfig& config);

// Adjacent strips (offset 1, stride 2) used when edge-guided sampling is
// disabled.
StripSampleSet LocalStrips(const Eigen::Vector2i& p, const SceneState& state,
                           const SamplingConfig& config);

// Re-expresses each sample's plane at p and evaluates it there. Samples
// whose plane cannot be transferred are dropped.
std::array<std::optional<Candidate>, 8> EvaluateStrips(
    const StripSampleSet& samples, const Eigen::Vector2i& p,
    const CameraModel& camera, const PixelEvaluator& evaluator);

// Per direction, the cheaper of the two re-evaluated candidates.
std::array<std::optional<Candidate>, 8> MergeSamples(
    const Eigen::Vector2i& p, const StripSampleSet& pn,
    const StripSampleSet& eg, const CameraModel& camera,
    const PixelEvaluator& evaluator);

}  // namespace dpe
