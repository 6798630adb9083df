#pragma once

#include <span>
#include <string>
#include <vector>

#include "dpe_mvs/image.h"
#include "dpe_mvs/pipeline.h"
#include "dpe_mvs/point_cloud.h"
#include "dpe_mvs/scene.h"

namespace dpe {

struct ThresholdScore {
  double threshold = 0.0;
  double accuracy = 0.0;      // reconstructed points within threshold of GT
  double completeness = 0.0;  // GT points within threshold of the reconstruction
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<ThresholdScore> rows;

  // Row for the given threshold; throws std::out_of_range if absent.
  const ThresholdScore& At(double threshold) const;
};

double F1Score(double accuracy, double completeness);

// Exact nearest-neighbor fractions at every threshold. Empty clouds score 0.
EvalReport Evaluate(const PointCloud& cloud, const PointCloud& gt,
                    std::span<const double> thresholds);

// Unprojects every valid GT depth pixel of every view, merging points that
// fall into the same 1e-4 grid cell.
PointCloud GroundTruthCloud(const RenderedScene& scene);

// max - min of the valid GT depths over all views.
double GroundTruthDepthRange(const RenderedScene& scene);

// Mean |est - gt| over pixels where `region` is set and gt is valid.
double MeanAbsDepthError(const DepthMap& estimate, const DepthMap& gt,
                         const Mask& region);

// Pixels within `radius` (Chebyshev) of a GT depth discontinuity, i.e. a
// 4-neighbor pair whose depths differ by more than `min_jump`.
Mask DepthEdgeBand(const DepthMap& gt, double min_jump, int radius);

// Fraction of `band` pixels whose depth error exceeds `max_error`.
double BandErrorFraction(const DepthMap& estimate, const DepthMap& gt,
                         const Mask& band, double max_error);

// Full pipeline plus fusion on a rendered scene.
struct SceneRun {
  PipelineResult result;
  PointCloud cloud;
  double seconds = 0.0;
};
SceneRun RunScene(const RenderedScene& scene, const PipelineConfig& config);

struct AblationRow {
  Toggles toggles;
  EvalReport report;
  double seconds = 0.0;
};

// All 16 combinations, all-off first and all-on last.
std::vector<Toggles> AllToggleSets();

std::vector<AblationRow> RunAblation(const RenderedScene& scene,
                                     const PipelineConfig& base,
                                     std::span<const Toggles> toggle_sets,
                                     std::span<const double> thresholds);

std::string FormatReport(const EvalReport& report);
std::string EvalReportCsv(const EvalReport& report);
std::string AblationTable(std::span<const AblationRow> rows);
std::string AblationCsv(std::span<const AblationRow> rows);

}  // namespace dpe
