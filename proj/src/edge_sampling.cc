#include "dpe_mvs/edge_sampling.h"

#include <algorithm>
#include <stdexcept>

namespace dpe {
namespace {

bool SameColor(const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
  return ((a.x() + a.y() + b.x() + b.y()) & 1) == 0;
}

}  // namespace

void SamplingConfig::Validate() const {
  if (base_count < 1 || base_step < 1 || k_min < 1 || k_min > k_max) {
    throw std::invalid_argument("SamplingConfig: invalid strip parameters");
  }
  if (level < 1 || image_width < 1) {
    throw std::invalid_argument("SamplingConfig: invalid level or width");
  }
}

int ExclusionRadius(int t_iter) {
  if (t_iter < 0) throw std::invalid_argument("ExclusionRadius: t_iter < 0");
  return std::max(1, 5 - 2 * t_iter);
}

ExtendedParams ComputeExtendedParams(int d_fe, const SamplingConfig& config) {
  if (d_fe < 0) throw std::invalid_argument("ComputeExtendedParams: d_fe < 0");
  double scale = 1.0;
  for (int i = 0; i < config.level; ++i) scale *= 4.0;
  const double limit = config.image_width / (30.0 * scale);
  const double d = std::min(static_cast<double>(d_fe), limit);
  ExtendedParams params;
  params.count = std::clamp(static_cast<int>(std::floor(d / 2.0)),
                            config.k_min, config.k_max);
  params.step = std::max(1, static_cast<int>(std::floor(d / params.count)));
  return params;
}

std::vector<Eigen::Vector2i> StripPositions(const Eigen::Vector2i& p,
                                            Direction direction, int start,
                                            int step, int count, int width,
                                            int height) {
  std::vector<Eigen::Vector2i> positions;
  const Eigen::Vector2i d = DirectionStep(direction);
  const bool diagonal = d.x() != 0 && d.y() != 0;
  for (int i = 0; i < count; ++i) {
    const int offset = start + i * step;
    Eigen::Vector2i q;
    if (diagonal) {
      // A pure diagonal step never changes color, so lead by one in x.
      q = p + Eigen::Vector2i((offset + 1) * d.x(), offset * d.y());
    } else {
      q = p + offset * d;
      if (SameColor(p, q)) {
        const Eigen::Vector2i perp(d.y() != 0 ? 1 : 0, d.x() != 0 ? 1 : 0);
        const Eigen::Vector2i shifted = q + perp;
        q = (shifted.x() < width && shifted.y() < height) ? shifted : q - perp;
      }
    }
    if (q.x() < 0 || q.y() < 0 || q.x() >= width || q.y() >= height) continue;
    positions.push_back(q);
  }
  return positions;
}

StripSampleSet SampleStrips(const Eigen::Vector2i& p, const SceneState& state,
                            const std::array<int, 8>& start,
                            const std::array<int, 8>& step,
                            const std::array<int, 8>& count) {
  StripSampleSet set;
  for (int k = 0; k < 8; ++k) {
    const auto positions = StripPositions(p, kAllDirections[k], start[k],
                                          step[k], count[k], state.width(),
                                          state.height());
    for (const Eigen::Vector2i& q : positions) {
      const double c = state.cost(q);
      if (!set[k] || c < set[k]->stored_cost) {
        set[k] = StripSample{q, state.Hypothesis(q), c};
      }
    }
  }
  return set;
}

StripSampleSet ProgressiveNonLocal(const Eigen::Vector2i& p,
                                   const SceneState& state, int t_iter,
                                   const SamplingConfig& config) {
  std::array<int, 8> start, step, count;
  start.fill(ExclusionRadius(t_iter));
  step.fill(config.base_step);
  count.fill(config.base_count);
  return SampleStrips(p, state, start, step, count);
}

StripSampleSet EdgeGuided(const Eigen::Vector2i& p, const SceneState& state,
                          const Mask& fine, int t_iter,
                          const SamplingConfig& config) {
  std::array<int, 8> start, step, count;
  start.fill(ExclusionRadius(t_iter));
  for (int k = 0; k < 8; ++k) {
    const ExtendedParams params =
        ComputeExtendedParams(EdgeDistance(p, kAllDirections[k], fine), config);
    step[k] = params.step;
    count[k] = params.count;
  }
  return SampleStrips(p, state, start, step, count);
}

StripSampleSet LocalStrips(const Eigen::Vector2i& p, const SceneState& state,
                           const SamplingConfig& config) {
  std::array<int, 8> start, step, count;
  start.fill(1);
  step.fill(config.base_step);
  count.fill(config.base_count);
  return SampleStrips(p, state, start, step, count);
}

std::array<std::optional<Candidate>, 8> EvaluateStrips(
    const StripSampleSet& samples, const Eigen::Vector2i& p,
    const CameraModel& camera, const PixelEvaluator& evaluator) {
  std::array<std::optional<Candidate>, 8> out;
  for (int k = 0; k < 8; ++k) {
    if (!samples[k]) continue;
    const auto hyp =
        TransferHypothesis(samples[k]->hyp, samples[k]->source.cast<double>(),
                           p.cast<double>(), camera);
    if (!hyp) continue;
    Candidate c;
    c.hyp = *hyp;
    c.cost = evaluator.Evaluate(c.hyp, c.view_costs.data());
    out[k] = c;
  }
  return out;
}

std::array<std::optional<Candidate>, 8> MergeSamples(
    const Eigen::Vector2i& p, const StripSampleSet& pn,
    const StripSampleSet& eg, const CameraModel& camera,
    const PixelEvaluator& evaluator) {
  auto merged = EvaluateStrips(pn, p, camera, evaluator);
  StripSampleSet eg_only;
  for (int k = 0; k < 8; ++k) {
    // Skip re-evaluating a slot whose two samples come from the same pixel.
    if (eg[k] && !(pn[k] && pn[k]->source == eg[k]->source)) eg_only[k] = eg[k];
  }
  const auto extended = EvaluateStrips(eg_only, p, camera, evaluator);
  for (int k = 0; k < 8; ++k) {
    if (extended[k] && (!merged[k] || extended[k]->cost < merged[k]->cost)) {
      merged[k] = extended[k];
    }
  }
  return merged;
}

}  // namespace dpe
