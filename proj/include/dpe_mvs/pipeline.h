#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dpe_mvs/deformable_pm.h"
#include "dpe_mvs/edge_cues.h"
#include "dpe_mvs/edge_sampling.h"
#include "dpe_mvs/geometry.h"
#include "dpe_mvs/image.h"
#include "dpe_mvs/patch_match.h"
#include "dpe_mvs/planar_model.h"
#include "dpe_mvs/point_cloud.h"

namespace dpe {

// Component switches. With everything off the pipeline runs plain
// adjacent-strip propagation, sector-only anchor search, point-to-plane
// RANSAC and fixed-size center patches.
struct Toggles {
  bool es = true;  // edge-guided non-local sampling
  bool pe = true;  // perception range expansion
  bool po = true;  // optimized RANSAC
  bool aa = true;  // adaptive center patch

  std::string Name() const;
  bool operator==(const Toggles&) const = default;
};

struct PyramidConfig {
  int levels = 0;  // 0 picks the largest count whose coarsest side is >= 64, capped at 4
  int scale_factor = 2;
  int sweeps_conventional = 3;
  int sweeps_deformable = 3;
  int full_iterations = 2;

  void Validate() const;
};

struct FusionConfig {
  int min_consistent_views = 1;
  double depth_rel_tol = 0.01;
  double reproj_tol = 2.0;
  double normal_tol = 0.0;  // radians; 0 disables the check

  void Validate() const;
};

struct PipelineConfig {
  MatchConfig match;
  TextureConfig texture;
  CoarseEdgeConfig coarse;
  SamplingConfig sampling;  // level and image_width are filled per level
  SearchConfig search;
  DeformableConfig deformable;
  PyramidConfig pyramid;
  FusionConfig fusion;
  Toggles toggles;
  uint64_t seed = 42;
  bool keep_levels = false;  // retain every level's states in the result

  void Validate() const;
};

// Applies one `key = value` setting such as `match.patch_radius = 5` or
// `toggles.es = false`. Throws std::invalid_argument for unknown keys or
// malformed values.
void ApplyConfigValue(PipelineConfig& config, const std::string& key,
                      const std::string& value);
// Reads a text file of `key = value` lines; `#` starts a comment.
void ApplyConfigFile(PipelineConfig& config, const std::string& path);
std::string ConfigToString(const PipelineConfig& config);

struct View {
  GrayImage image;
  CameraModel camera;
  double depth_min = 0.0;
  double depth_max = 0.0;
};

int AutoLevels(int width, int height);

// 2x2 box downsampling with matching intrinsics.
View DownsampleView(const View& view);

// Index 0 holds the full-resolution views (level 1).
std::vector<std::vector<View>> BuildPyramid(const std::vector<View>& views,
                                            int levels);

// Nearest-neighbor upsampling of depth, normal and reliability to the given
// size; costs are reset to the maximum.
SceneState UpsampleState(const SceneState& coarse, int width, int height);

struct LevelStats {
  int level = 0;
  int view = 0;
  double reliable_fraction = 0.0;
  int unreliable = 0;
  int with_anchors = 0;
  int gamma_zero = 0;
  double seconds = 0.0;
};

struct AnchorRecord {
  Eigen::Vector2i pixel;
  std::vector<Eigen::Vector2i> anchors;
};

struct PipelineResult {
  std::vector<SceneState> states;  // full resolution, one per view
  std::vector<std::vector<SceneState>> level_states;  // [level-1][view] if kept
  std::vector<LevelStats> stats;
  std::vector<EdgeCues> cues;  // full resolution, one per view
  // Full-resolution pixels that were unreliable at the start of some
  // iteration, and those whose center patch was discarded at least once.
  std::vector<Mask> unreliable_seen;
  std::vector<Mask> gamma_zero;
  std::vector<std::vector<AnchorRecord>> anchors;  // last full-resolution iteration
  int levels = 0;
};

PipelineResult RunPipeline(const std::vector<View>& views,
                           const PipelineConfig& config);

// Geometric-consistency fusion of per-view depth/normal maps.
PointCloud Fuse(const std::vector<SceneState>& states,
                const std::vector<View>& views, const FusionConfig& config);

}  // namespace dpe
