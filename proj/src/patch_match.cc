#include "dpe_mvs/patch_match.h"

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace dpe {
namespace {

constexpr uint64_t kInitStream = 0x1a17;
constexpr double kMinVariance = 1e-8;

// NCC cost from the reference statistics and the running sums of the source
// samples. The reference samples are mean-centered, so the cross term needs
// no source mean.
double NccFromSums(double ref_sum_sq, int n, double sum, double sum_sq,
                   double cross) {
  const double src_sum_sq = sum_sq - sum * sum / n;
  if (ref_sum_sq / n < kMinVariance || src_sum_sq / n < kMinVariance) {
    return kMaxCost;
  }
  const double ncc = cross / std::sqrt(ref_sum_sq * src_sum_sq);
  return std::clamp(1.0 - ncc, 0.0, kMaxCost);
}

Eigen::Vector3d RandomHemisphereNormal(Rng& rng, const Eigen::Vector3d& ray) {
  const double z = UniformRange(rng, -1.0, 1.0);
  const double phi = UniformRange(rng, 0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return OrientTowardCamera({r * std::cos(phi), r * std::sin(phi), z}, ray);
}

double RandomInverseDepth(Rng& rng, double depth_min, double depth_max) {
  const double inv = UniformRange(rng, 1.0 / depth_max, 1.0 / depth_min);
  return std::clamp(1.0 / inv, depth_min, depth_max);
}

}  // namespace

void MatchConfig::Validate() const {
  if (patch_radius < 2 || patch_stride < 1 || iterations < 1) {
    throw std::invalid_argument("MatchConfig: invalid patch or iteration count");
  }
  const int per_axis = 2 * patch_radius / patch_stride + 1;
  if (per_axis * per_axis > kMaxPatchSamples) {
    throw std::invalid_argument("MatchConfig: patch has too many samples");
  }
}

SceneState::SceneState(int width, int height, int num_sources)
    : depth(width, height, 0.0),
      normal(width, height, Eigen::Vector3d(0, 0, -1)),
      cost(width, height, kMaxCost),
      reliable(width, height, 0),
      view_cost(width, height, ViewCostArray{}),
      num_sources(num_sources) {
  if (num_sources < 1 || num_sources > kMaxSourceViews) {
    throw std::invalid_argument("SceneState: unsupported source view count");
  }
  for (auto& v : view_cost.data()) v.fill(static_cast<float>(kMaxCost));
}

double NccCost(std::span<const float> ref, std::span<const float> src) {
  if (ref.size() != src.size()) {
    throw std::invalid_argument("NccCost: patch size mismatch");
  }
  if (ref.size() < 9) {
    throw std::invalid_argument("NccCost: fewer than 9 samples");
  }
  const size_t n = ref.size();
  double ref_mean = 0.0, src_mean = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ref_mean += ref[i];
    src_mean += src[i];
  }
  ref_mean /= static_cast<double>(n);
  src_mean /= static_cast<double>(n);
  double ref_var = 0.0, src_var = 0.0, cov = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double a = ref[i] - ref_mean;
    const double b = src[i] - src_mean;
    ref_var += a * a;
    src_var += b * b;
    cov += a * b;
  }
  if (ref_var / static_cast<double>(n) < kMinVariance ||
      src_var / static_cast<double>(n) < kMinVariance) {
    return kMaxCost;
  }
  return std::clamp(1.0 - cov / std::sqrt(ref_var * src_var), 0.0, kMaxCost);
}

MatchContext::MatchContext(const GrayImage& ref_image,
                           const CameraModel& ref_camera,
                           std::vector<Source> sources, double depth_min,
                           double depth_max)
    : ref_image_(&ref_image),
      ref_camera_(ref_camera),
      sources_(std::move(sources)),
      depth_min_(depth_min),
      depth_max_(depth_max) {
  if (sources_.empty() || static_cast<int>(sources_.size()) > kMaxSourceViews) {
    throw std::invalid_argument("MatchContext: need 1..8 source views");
  }
  if (!(depth_min > 0.0) || !(depth_max > depth_min)) {
    throw std::invalid_argument("MatchContext: invalid depth bounds");
  }
  for (const Source& s : sources_) {
    pairs_.emplace_back(ref_camera_, s.camera);
  }
}

RefPatch MatchContext::ExtractRefPatch(const PatchSpec& spec) const {
  RefPatch patch;
  const GrayImage& img = *ref_image_;
  double sum = 0.0;
  for (int dy = -spec.radius; dy <= spec.radius; dy += spec.stride) {
    const int y = spec.center.y() + dy;
    if (y < 0 || y >= img.height()) continue;
    for (int dx = -spec.radius; dx <= spec.radius; dx += spec.stride) {
      const int x = spec.center.x() + dx;
      if (x < 0 || x >= img.width()) continue;
      if (patch.count >= kMaxPatchSamples) break;
      const float v = img(x, y);
      patch.centered[patch.count] = v;
      patch.x[patch.count] = static_cast<float>(x);
      patch.y[patch.count] = static_cast<float>(y);
      sum += v;
      ++patch.count;
    }
  }
  if (patch.count < 9) {
    return patch;
  }
  const double mean = sum / patch.count;
  for (int i = 0; i < patch.count; ++i) {
    const double c = patch.centered[i] - mean;
    patch.centered[i] = static_cast<float>(c);
    patch.sum_sq += c * c;
  }
  patch.textured = patch.sum_sq / patch.count >= kMinVariance;
  return patch;
}

HomographySet MatchContext::Homographies(const Eigen::Vector2i& anchor,
                                         const PlaneHypothesis& hyp) const {
  HomographySet set;
  const Eigen::Vector2d pixel = anchor.cast<double>();
  for (size_t j = 0; j < pairs_.size(); ++j) {
    set[j] = pairs_[j].Homography(pixel, hyp);
  }
  return set;
}

void MatchContext::PatchViewCosts(const RefPatch& patch,
                                  const HomographySet& homographies,
                                  float* view_costs) const {
  const int n = patch.count;
  alignas(32) std::array<float, kMaxPatchSamples> us, vs;
  alignas(32) std::array<int, kMaxPatchSamples> offsets;
  const float* xs = patch.x.data();
  const float* ys = patch.y.data();
  for (size_t j = 0; j < sources_.size(); ++j) {
    view_costs[j] = static_cast<float>(kMaxCost);
    if (!patch.textured || !homographies[j]) continue;
    const Eigen::Matrix3f h = homographies[j]->cast<float>();
    const float h00 = h(0, 0), h01 = h(0, 1), h02 = h(0, 2);
    const float h10 = h(1, 0), h11 = h(1, 1), h12 = h(1, 2);
    const float h20 = h(2, 0), h21 = h(2, 1), h22 = h(2, 2);
    const GrayImage& image = *sources_[j].image;
    const int width = image.width();
    const int height = image.height();
    const float max_x = static_cast<float>(width - 1);
    const float max_y = static_cast<float>(height - 1);

    // The three loops below are kept free of early exits so they vectorize.
    int outside = 0;
    for (int i = 0; i < n; ++i) {
      const float w = h20 * xs[i] + h21 * ys[i] + h22;
      const float inv_w = 1.0f / w;
      const float u = (h00 * xs[i] + h01 * ys[i] + h02) * inv_w;
      const float v = (h10 * xs[i] + h11 * ys[i] + h12) * inv_w;
      us[i] = u;
      vs[i] = v;
      outside |= !(w > 0.0f) | !(u >= 0.0f) | !(v >= 0.0f) | !(u <= max_x) |
                 !(v <= max_y);
    }
    if (outside) continue;
    for (int i = 0; i < n; ++i) {
      // Clamping to width - 2 keeps the 2x2 support inside; the fraction
      // then reaches 1 on the last column.
      const int x0 = std::min(static_cast<int>(us[i]), width - 2);
      const int y0 = std::min(static_cast<int>(vs[i]), height - 2);
      offsets[i] = y0 * width + x0;
      us[i] -= static_cast<float>(x0);
      vs[i] -= static_cast<float>(y0);
    }
    // Samples are shifted by a pivot intensity so the float sums stay well
    // conditioned; the NCC is invariant to the shift.
    const float* pixels = image.data().data();
    const float pivot = pixels[offsets[0]];
    float sum = 0.0f, sum_sq = 0.0f, cross = 0.0f;
    for (int i = 0; i < n; ++i) {
      const float* r0 = pixels + offsets[i];
      const float* r1 = r0 + width;
      const float top = r0[0] + us[i] * (r0[1] - r0[0]);
      const float bottom = r1[0] + us[i] * (r1[1] - r1[0]);
      const float sample = top + vs[i] * (bottom - top) - pivot;
      sum += sample;
      sum_sq += sample * sample;
      cross += patch.centered[i] * sample;
    }
    view_costs[j] = static_cast<float>(NccFromSums(patch.sum_sq, n, sum, sum_sq, cross));
  }
}

double MatchContext::Aggregate(const float* view_costs,
                               const double* weights) const {
  double num = 0.0, den = 0.0;
  for (size_t j = 0; j < sources_.size(); ++j) {
    const double w = weights ? weights[j] : 1.0;
    num += w * view_costs[j];
    den += w;
  }
  return den > 0.0 ? std::clamp(num / den, 0.0, kMaxCost) : kMaxCost;
}

void ViewWeights(const SceneState& state, const Eigen::Vector2i& p,
                 const MatchConfig& config, double* weights) {
  const ViewCostArray& prev = state.view_cost(p);
  for (int j = 0; j < state.num_sources; ++j) {
    weights[j] = state.weights_ready
                     ? ViewWeight(prev[j], config.weight_variance)
                     : 1.0;
  }
}

PixelEvaluator::PixelEvaluator(const MatchContext& context,
                               const SceneState& state, const PatchSpec& spec,
                               const MatchConfig& config)
    : context_(context), spec_(spec), patch_(context.ExtractRefPatch(spec)) {
  ViewWeights(state, spec.center, config, weights_.data());
}

double PixelEvaluator::Evaluate(const PlaneHypothesis& hyp,
                                float* view_costs) const {
  const HomographySet hs = context_.Homographies(spec_.center, hyp);
  context_.PatchViewCosts(patch_, hs, view_costs);
  return context_.Aggregate(view_costs, weights_.data());
}

double MultiViewCost(const MatchContext& context, const PlaneHypothesis& hyp,
                     const PatchSpec& spec, const double* weights,
                     float* view_costs) {
  ViewCostArray local;
  float* out = view_costs ? view_costs : local.data();
  const RefPatch patch = context.ExtractRefPatch(spec);
  context.PatchViewCosts(patch, context.Homographies(spec.center, hyp), out);
  return context.Aggregate(out, weights);
}

PatchSpec FixedPatch(const Eigen::Vector2i& p, const MatchConfig& config) {
  return {p, config.patch_radius, config.patch_stride};
}

int CheckerboardSweep(SceneState& state, Color color, const Sampler& sampler,
                      const MatchContext& context, const MatchConfig& config,
                      const PixelFilter& filter) {
  std::vector<Candidate> candidates;
  int updates = 0;
  for (int y = 0; y < state.height(); ++y) {
    for (int x = (y + static_cast<int>(color)) & 1; x < state.width(); x += 2) {
      const Eigen::Vector2i p(x, y);
      if (filter && !filter(p)) continue;
      const PixelEvaluator evaluator(context, state, FixedPatch(p, config),
                                     config);
      candidates.clear();
      sampler(p, state, evaluator, candidates);
      int best = -1;
      double best_cost = state.cost(p);
      for (size_t i = 0; i < candidates.size(); ++i) {
        Candidate& c = candidates[i];
        if (!(c.hyp.depth >= context.depth_min() &&
              c.hyp.depth <= context.depth_max())) {
          continue;
        }
        if (std::isnan(c.cost)) {
          c.cost = evaluator.Evaluate(c.hyp, c.view_costs.data());
        }
        if (c.cost < best_cost) {
          best_cost = c.cost;
          best = static_cast<int>(i);
        }
      }
      if (best >= 0) {
        state.SetHypothesis(p, candidates[best].hyp);
        state.cost(p) = best_cost;
        state.view_cost(p) = candidates[best].view_costs;
        ++updates;
      }
    }
  }
  return updates;
}

PlaneHypothesis RandomHypothesis(Rng& rng, const Eigen::Vector3d& ray,
                                 double depth_min, double depth_max) {
  const double depth = RandomInverseDepth(rng, depth_min, depth_max);
  return {RandomHemisphereNormal(rng, ray), depth};
}

void RandomInit(SceneState& state, const CameraModel& camera, double depth_min,
                double depth_max, uint64_t seed) {
  if (!(depth_min > 0.0) || !(depth_max > depth_min)) {
    throw std::invalid_argument("RandomInit: invalid depth bounds");
  }
  for (int y = 0; y < state.height(); ++y) {
    for (int x = 0; x < state.width(); ++x) {
      Rng rng = MakeRng(seed, {kInitStream, state.depth.Index(x, y)});
      state.SetHypothesis(
          {x, y}, RandomHypothesis(rng, camera.Ray({double(x), double(y)}),
                                   depth_min, depth_max));
      state.cost(x, y) = kMaxCost;
    }
  }
  state.weights_ready = false;
}

std::array<PlaneHypothesis, 6> Refine(const Eigen::Vector2i& p,
                                      const PlaneHypothesis& hyp, Rng& rng,
                                      const CameraModel& camera,
                                      double depth_min, double depth_max,
                                      const MatchConfig& config) {
  const Eigen::Vector3d ray = camera.Ray(p.cast<double>());
  const double f = config.refine_depth_fraction;
  const double depth_pert =
      std::clamp(hyp.depth * (1.0 + UniformRange(rng, -f, f)), depth_min,
                 depth_max);

  // Rotate the normal about a random perpendicular axis by at most the cone
  // angle, shrinking the angle until the result faces the camera.
  Eigen::Vector3d normal_pert = hyp.normal;
  {
    const Eigen::Vector3d helper = std::abs(hyp.normal.x()) < 0.9
                                       ? Eigen::Vector3d::UnitX()
                                       : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d a = hyp.normal.cross(helper).normalized();
    const Eigen::Vector3d b = hyp.normal.cross(a);
    const double phi = UniformRange(rng, 0.0, 2.0 * std::numbers::pi);
    const Eigen::Vector3d axis = std::cos(phi) * a + std::sin(phi) * b;
    double angle = UniformRange(rng, 0.0, config.refine_normal_degrees) *
                   std::numbers::pi / 180.0;
    for (int attempt = 0; attempt < 4; ++attempt, angle *= 0.5) {
      const Eigen::Vector3d n =
          Eigen::AngleAxisd(angle, axis) * hyp.normal;
      if (n.dot(ray) < 0.0) {
        normal_pert = n.normalized();
        break;
      }
    }
  }
  const PlaneHypothesis random = RandomHypothesis(rng, ray, depth_min, depth_max);
  return {PlaneHypothesis{hyp.normal, depth_pert},
          PlaneHypothesis{normal_pert, hyp.depth},
          random,
          PlaneHypothesis{normal_pert, depth_pert},
          PlaneHypothesis{hyp.normal, random.depth},
          PlaneHypothesis{random.normal, hyp.depth}};
}

void EvaluateState(SceneState& state, const MatchContext& context,
                   const MatchConfig& config, const PixelFilter& filter) {
  for (int y = 0; y < state.height(); ++y) {
    for (int x = 0; x < state.width(); ++x) {
      const Eigen::Vector2i p(x, y);
      if (filter && !filter(p)) continue;
      const PixelEvaluator evaluator(context, state, FixedPatch(p, config),
                                     config);
      ViewCostArray costs;
      costs.fill(static_cast<float>(kMaxCost));
      state.cost(p) = evaluator.Evaluate(state.Hypothesis(p), costs.data());
      state.view_cost(p) = costs;
    }
  }
}

bool GeometricallyConsistent(const Eigen::Vector2i& p, double depth,
                             const CameraModel& camera,
                             std::span<const ConsistencyView> others,
                             double rel_tol) {
  if (!(depth > 0.0)) return false;
  const Eigen::Vector3d point = Unproject(p.cast<double>(), depth, camera);
  for (const ConsistencyView& other : others) {
    const auto proj = TryProject(point, *other.camera);
    if (!proj) continue;
    const int qx = static_cast<int>(std::lround(proj->pixel.x()));
    const int qy = static_cast<int>(std::lround(proj->pixel.y()));
    if (!other.depth->Contains(qx, qy)) continue;
    const double observed = (*other.depth)(qx, qy);
    if (observed > 0.0 &&
        std::abs(proj->depth - observed) / observed < rel_tol) {
      return true;
    }
  }
  return false;
}

Mask ClassifyReliability(const SceneState& state, const CameraModel& camera,
                         std::span<const ConsistencyView> others,
                         const MatchConfig& config) {
  Mask reliable(state.width(), state.height(), 0);
  for (int y = 0; y < state.height(); ++y) {
    for (int x = 0; x < state.width(); ++x) {
      if (!(state.cost(x, y) < config.reliability_tau_cost)) continue;
      if (GeometricallyConsistent({x, y}, state.depth(x, y), camera, others,
                                  config.consistency_rel_tol)) {
        reliable(x, y) = 1;
      }
    }
  }
  return reliable;
}

}  // namespace dpe
