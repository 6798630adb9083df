#include "dpe_mvs/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "dpe_mvs/random.h"

namespace dpe {
namespace {

constexpr uint64_t kInitStream = 1;
constexpr uint64_t kRefineStream = 2;
constexpr uint64_t kRansacStream = 3;
constexpr uint64_t kDeformStream = 4;
constexpr uint64_t kCueStream = 5;

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int ParseInt(const std::string& key, const std::string& value) {
  size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" +
                                value + "'");
  }
  return v;
}

double ParseDouble(const std::string& key, const std::string& value) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" +
                                value + "'");
  }
  return v;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw std::invalid_argument("config: " + key + " expects a boolean, got '" +
                              value + "'");
}

struct Setting {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
std::string Format(T v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

#define DPE_INT(name, field)                                                   \
  {name,                                                                       \
   {[](PipelineConfig& c, const std::string& k, const std::string& v) {        \
      c.field = ParseInt(k, v);                                                \
    },                                                                         \
    [](const PipelineConfig& c) { return Format(c.field); }}}
#define DPE_DOUBLE(name, field)                                                \
  {name,                                                                       \
   {[](PipelineConfig& c, const std::string& k, const std::string& v) {        \
      c.field = ParseDouble(k, v);                                             \
    },                                                                         \
    [](const PipelineConfig& c) { return Format(c.field); }}}
#define DPE_BOOL(name, field)                                                  \
  {name,                                                                       \
   {[](PipelineConfig& c, const std::string& k, const std::string& v) {        \
      c.field = ParseBool(k, v);                                               \
    },                                                                         \
    [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); }}}

const std::map<std::string, Setting>& Settings() {
  static const std::map<std::string, Setting> settings = {
      DPE_INT("match.patch_radius", match.patch_radius),
      DPE_INT("match.patch_stride", match.patch_stride),
      DPE_DOUBLE("match.reliability_tau_cost", match.reliability_tau_cost),
      DPE_DOUBLE("match.weight_variance", match.weight_variance),
      DPE_DOUBLE("match.consistency_rel_tol", match.consistency_rel_tol),
      DPE_DOUBLE("match.refine_depth_fraction", match.refine_depth_fraction),
      DPE_DOUBLE("match.refine_normal_degrees", match.refine_normal_degrees),
      DPE_DOUBLE("texture.sigma", texture.sigma),
      DPE_DOUBLE("texture.alpha", texture.alpha),
      DPE_DOUBLE("texture.beta1", texture.beta1),
      DPE_DOUBLE("texture.beta2", texture.beta2),
      DPE_INT("texture.window", texture.window),
      DPE_DOUBLE("coarse.roberts_fraction", coarse.roberts_fraction),
      DPE_DOUBLE("coarse.min_gradient", coarse.min_gradient),
      DPE_INT("coarse.min_votes", coarse.min_votes),
      DPE_INT("coarse.vote_divisor", coarse.vote_divisor),
      DPE_INT("coarse.max_gap", coarse.max_gap),
      DPE_INT("coarse.min_segment_length", coarse.min_segment_length),
      DPE_INT("sampling.base_count", sampling.base_count),
      DPE_INT("sampling.base_step", sampling.base_step),
      DPE_INT("sampling.k_min", sampling.k_min),
      DPE_INT("sampling.k_max", sampling.k_max),
      DPE_INT("search.eta", search.eta),
      DPE_INT("search.phi", search.phi),
      DPE_INT("search.anchor_cap", search.anchor_cap),
      DPE_DOUBLE("search.epsilon", search.epsilon),
      DPE_DOUBLE("search.tau", search.tau),
      DPE_INT("search.ransac_iters", search.ransac_iters),
      DPE_DOUBLE("search.constrained_fraction", search.constrained_fraction),
      DPE_DOUBLE("deformable.lambda", deformable.lambda),
      DPE_DOUBLE("deformable.omega", deformable.omega),
      DPE_INT("pyramid.levels", pyramid.levels),
      DPE_INT("pyramid.sweeps_conventional", pyramid.sweeps_conventional),
      DPE_INT("pyramid.sweeps_deformable", pyramid.sweeps_deformable),
      DPE_INT("pyramid.full_iterations", pyramid.full_iterations),
      DPE_INT("fusion.min_consistent_views", fusion.min_consistent_views),
      DPE_DOUBLE("fusion.depth_rel_tol", fusion.depth_rel_tol),
      DPE_DOUBLE("fusion.reproj_tol", fusion.reproj_tol),
      DPE_DOUBLE("fusion.normal_tol", fusion.normal_tol),
      DPE_BOOL("toggles.es", toggles.es),
      DPE_BOOL("toggles.pe", toggles.pe),
      DPE_BOOL("toggles.po", toggles.po),
      DPE_BOOL("toggles.aa", toggles.aa),
      {"seed",
       {[](PipelineConfig& c, const std::string& k, const std::string& v) {
          size_t used = 0;
          try {
            c.seed = std::stoull(v, &used);
          } catch (const std::exception&) {
            used = 0;
          }
          if (used == 0 || used != v.size()) {
            throw std::invalid_argument("config: " + k + " expects an unsigned integer");
          }
        },
        [](const PipelineConfig& c) { return Format(c.seed); }}},
  };
  return settings;
}

#undef DPE_INT
#undef DPE_DOUBLE
#undef DPE_BOOL

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since)
      .count();
}

// Everything one reference view needs while a level is processed.
struct ViewLevel {
  SceneState state;
  EdgeCues cues;
  std::unique_ptr<MatchContext> context;
  Mask gamma_zero;
  Mask unreliable_seen;
  std::vector<AnchorRecord> anchors;
};

class LevelRunner {
 public:
  LevelRunner(const std::vector<View>& views, int level, int image_width,
              int64_t image_area, const PipelineConfig& config)
      : views_(views), level_(level), config_(config) {
    sampling_ = config.sampling;
    sampling_.level = level;
    sampling_.image_width = image_width;
    data_.resize(views.size());
    for (size_t v = 0; v < views.size(); ++v) {
      std::vector<MatchContext::Source> sources;
      for (size_t j = 0; j < views.size(); ++j) {
        if (j != v) sources.push_back({&views[j].image, views[j].camera});
      }
      ViewLevel& d = data_[v];
      d.context = std::make_unique<MatchContext>(
          views[v].image, views[v].camera, std::move(sources),
          views[v].depth_min, views[v].depth_max);
      d.cues = ExtractEdgeCues(views[v].image, level, image_area, config.texture,
                               config.coarse,
                               DeriveSeed(config.seed, {kCueStream, uint64_t(level), v}));
      d.gamma_zero = Mask(views[v].image.width(), views[v].image.height(), 0);
      d.unreliable_seen = d.gamma_zero;
    }
  }

  std::vector<ViewLevel>& data() { return data_; }

  void InitializeRandom() {
    for (size_t v = 0; v < views_.size(); ++v) {
      ViewLevel& d = data_[v];
      d.state = SceneState(views_[v].image.width(), views_[v].image.height(),
                           d.context->num_sources());
      RandomInit(d.state, views_[v].camera, views_[v].depth_min,
                 views_[v].depth_max,
                 DeriveSeed(config_.seed, {kInitStream, uint64_t(level_), v}));
      EvaluateState(d.state, *d.context, config_.match);
    }
  }

  void InitializeFrom(std::vector<SceneState> coarse) {
    for (size_t v = 0; v < views_.size(); ++v) {
      ViewLevel& d = data_[v];
      d.state = UpsampleState(coarse[v], views_[v].image.width(),
                              views_[v].image.height());
      d.state.weights_ready = true;
      EvaluateState(d.state, *d.context, config_.match);
    }
    Classify();
  }

  void Classify() {
    for (size_t v = 0; v < views_.size(); ++v) {
      std::vector<ConsistencyView> others;
      for (size_t j = 0; j < views_.size(); ++j) {
        if (j != v) others.push_back({&views_[j].camera, &data_[j].state.depth});
      }
      data_[v].state.reliable = ClassifyReliability(
          data_[v].state, views_[v].camera, others, config_.match);
    }
  }

  void ConventionalSweeps(size_t v, int iteration, const PixelFilter& filter) {
    ViewLevel& d = data_[v];
    const CameraModel& camera = views_[v].camera;
    const int sweeps = config_.pyramid.sweeps_conventional;
    for (int s = 0; s < sweeps; ++s) {
      const int t_iter = iteration * sweeps + s;
      const Sampler propagate = [&](const Eigen::Vector2i& p,
                                    const SceneState& state,
                                    const PixelEvaluator& evaluator,
                                    std::vector<Candidate>& out) {
        std::array<std::optional<Candidate>, 8> merged;
        if (!config_.toggles.es) {
          merged = EvaluateStrips(LocalStrips(p, state, sampling_), p, camera,
                                  evaluator);
        } else {
          const StripSampleSet pn = ProgressiveNonLocal(p, state, t_iter, sampling_);
          if (d.cues.fine(p)) {
            merged = EvaluateStrips(pn, p, camera, evaluator);
          } else {
            const StripSampleSet eg =
                EdgeGuided(p, state, d.cues.fine, t_iter, sampling_);
            merged = MergeSamples(p, pn, eg, camera, evaluator);
          }
        }
        for (const auto& c : merged) {
          if (c) out.push_back(*c);
        }
      };
      const uint64_t refine_seed = DeriveSeed(
          config_.seed, {kRefineStream, uint64_t(level_), v, uint64_t(t_iter)});
      const Sampler refine = [&](const Eigen::Vector2i& p, const SceneState& state,
                                 const PixelEvaluator&,
                                 std::vector<Candidate>& out) {
        Rng rng = MakeRng(refine_seed, {uint64_t(state.depth.Index(p.x(), p.y()))});
        for (const PlaneHypothesis& h :
             Refine(p, state.Hypothesis(p), rng, camera, views_[v].depth_min,
                    views_[v].depth_max, config_.match)) {
          out.push_back({h});
        }
      };
      for (Color color : {Color::kRed, Color::kBlack}) {
        CheckerboardSweep(d.state, color, propagate, *d.context, config_.match,
                          filter);
        CheckerboardSweep(d.state, color, refine, *d.context, config_.match,
                          filter);
      }
      d.state.weights_ready = true;
    }
  }

  std::vector<DeformablePixel> DiscoverAnchors(size_t v, int iteration,
                                               LevelStats& stats) {
    ViewLevel& d = data_[v];
    const SceneState& state = d.state;
    const CameraModel& camera = views_[v].camera;
    const ReliableIndex index(state.reliable);
    const NearestReliableMap nearest(state.reliable);
    const uint64_t ransac_seed = DeriveSeed(
        config_.seed, {kRansacStream, uint64_t(level_), v, uint64_t(iteration)});
    std::vector<DeformablePixel> out;
    d.anchors.clear();
    for (int y = 0; y < state.height(); ++y) {
      for (int x = 0; x < state.width(); ++x) {
        const Eigen::Vector2i p(x, y);
        if (state.reliable(p)) continue;
        ++stats.unreliable;
        d.unreliable_seen(p) = 1;
        std::vector<Eigen::Vector2i> pool = index.SectorSearch(p, config_.search.phi);
        if (config_.toggles.pe) {
          for (const Eigen::Vector2i& q :
               ExtendedSearch(p, d.cues, nearest, config_.search)) {
            if (std::find(pool.begin(), pool.end(), q) == pool.end()) pool.push_back(q);
          }
        }
        AnchorRecord record{p, {}};
        const auto candidates = MakeAnchorCandidates(pool, state, camera);
        const bool stochastic = d.cues.stochastic(p) != 0;
        Rng rng = MakeRng(ransac_seed, {uint64_t(state.depth.Index(x, y))});
        const auto fit = ConstrainedRansac(
            p, state.depth(p), candidates, d.cues.fine, camera, config_.search,
            {config_.toggles.po, stochastic}, rng);
        std::optional<AnchorSet> anchors;
        if (fit) anchors = SelectAnchors(*fit, candidates, state.width(), config_.search);
        if (anchors) {
          PatchSpec center{p, config_.deformable.fixed_radius,
                           config_.deformable.fixed_stride};
          if (config_.toggles.aa) {
            center = AdaptivePatchRadius(p, *anchors, d.cues, config_.deformable,
                                         stochastic, d.cues.IsLowTexture(p));
          }
          if (center.radius == 0) {
            d.gamma_zero(p) = 1;
            ++stats.gamma_zero;
          }
          for (const Anchor& a : anchors->anchors) record.anchors.push_back(a.pixel);
          out.push_back({p, std::move(*anchors), center});
          ++stats.with_anchors;
        }
        d.anchors.push_back(std::move(record));
      }
    }
    return out;
  }

  void DeformablePhase(size_t v, int iteration,
                       std::vector<DeformablePixel>& pixels) {
    if (pixels.empty()) return;
    ViewLevel& d = data_[v];
    for (DeformablePixel& entry : pixels) {
      RefreshAnchorPlane(entry.anchors, d.state, views_[v].camera);
    }
    Grid<double> cost(d.state.width(), d.state.height(),
                      std::numeric_limits<double>::quiet_NaN());
    for (int s = 0; s < config_.pyramid.sweeps_deformable; ++s) {
      for (Color color : {Color::kRed, Color::kBlack}) {
        const uint64_t seed =
            DeriveSeed(config_.seed, {kDeformStream, uint64_t(level_), v,
                                      uint64_t(iteration), uint64_t(s),
                                      uint64_t(color)});
        DeformableSweep(d.state, cost, pixels, color, *d.context,
                        config_.deformable, config_.match, seed);
      }
    }
  }

  void RunCoarsest(std::vector<LevelStats>& all_stats) {
    InitializeRandom();
    for (int it = 0; it < config_.pyramid.full_iterations; ++it) {
      for (size_t v = 0; v < views_.size(); ++v) ConventionalSweeps(v, it, {});
    }
    Classify();
    for (size_t v = 0; v < views_.size(); ++v) {
      LevelStats stats;
      stats.level = level_;
      stats.view = static_cast<int>(v);
      stats.reliable_fraction = ReliableFraction(v);
      all_stats.push_back(stats);
    }
  }

  void RunFiner(std::vector<LevelStats>& all_stats) {
    std::vector<LevelStats> stats(views_.size());
    for (int it = 0; it < config_.pyramid.full_iterations; ++it) {
      for (size_t v = 0; v < views_.size(); ++v) {
        const auto start = std::chrono::steady_clock::now();
        LevelStats iteration_stats;
        std::vector<DeformablePixel> pixels = DiscoverAnchors(v, it, iteration_stats);
        Mask deformable(data_[v].state.width(), data_[v].state.height(), 0);
        for (const DeformablePixel& e : pixels) deformable(e.pixel) = 1;
        ConventionalSweeps(v, it, [&](const Eigen::Vector2i& p) {
          return deformable(p) == 0;
        });
        DeformablePhase(v, it, pixels);
        EvaluateState(data_[v].state, *data_[v].context, config_.match);
        stats[v].unreliable += iteration_stats.unreliable;
        stats[v].with_anchors += iteration_stats.with_anchors;
        stats[v].gamma_zero += iteration_stats.gamma_zero;
        stats[v].seconds += Seconds(start);
      }
      Classify();
    }
    for (size_t v = 0; v < views_.size(); ++v) {
      stats[v].level = level_;
      stats[v].view = static_cast<int>(v);
      stats[v].reliable_fraction = ReliableFraction(v);
      all_stats.push_back(stats[v]);
    }
  }

  double ReliableFraction(size_t v) const {
    const Mask& r = data_[v].state.reliable;
    int64_t n = 0;
    for (uint8_t b : r.data()) n += b;
    return static_cast<double>(n) / static_cast<double>(r.size());
  }

 private:
  const std::vector<View>& views_;
  int level_;
  const PipelineConfig& config_;
  SamplingConfig sampling_;
  std::vector<ViewLevel> data_;
};

}  // namespace

std::string Toggles::Name() const {
  std::string name;
  auto add = [&](bool on, const char* tag) {
    if (!on) return;
    if (!name.empty()) name += "+";
    name += tag;
  };
  add(es, "ES");
  add(pe, "PE");
  add(po, "PO");
  add(aa, "AA");
  return name.empty() ? "none" : name;
}

void PyramidConfig::Validate() const {
  if (levels < 0 || scale_factor != 2) {
    throw std::invalid_argument("PyramidConfig: levels >= 0 and scale factor 2 required");
  }
  if (sweeps_conventional < 1 || sweeps_deformable < 0 || full_iterations < 1) {
    throw std::invalid_argument("PyramidConfig: invalid sweep counts");
  }
}

void FusionConfig::Validate() const {
  if (min_consistent_views < 1 || !(depth_rel_tol > 0.0) || !(reproj_tol > 0.0) ||
      normal_tol < 0.0) {
    throw std::invalid_argument("FusionConfig: invalid tolerances");
  }
}

void PipelineConfig::Validate() const {
  match.Validate();
  texture.Validate();
  search.Validate();
  deformable.Validate();
  pyramid.Validate();
  fusion.Validate();
  if (sampling.base_count < 1 || sampling.base_step < 1 || sampling.k_min < 1 ||
      sampling.k_min > sampling.k_max) {
    throw std::invalid_argument("SamplingConfig: invalid strip parameters");
  }
  if (deformable.fixed_radius != match.patch_radius ||
      deformable.fixed_stride != match.patch_stride) {
    throw std::invalid_argument(
        "PipelineConfig: deformable fixed patch must equal the match patch");
  }
}

void ApplyConfigValue(PipelineConfig& config, const std::string& key,
                      const std::string& value) {
  const auto& settings = Settings();
  const auto it = settings.find(key);
  if (it == settings.end()) {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  it->second.set(config, key, value);
  config.deformable.fixed_radius = config.match.patch_radius;
  config.deformable.fixed_stride = config.match.patch_stride;
}

void ApplyConfigFile(PipelineConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: " + path + ":" +
                                  std::to_string(line_no) + ": expected key = value");
    }
    ApplyConfigValue(config, Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
}

std::string ConfigToString(const PipelineConfig& config) {
  std::string out;
  for (const auto& [key, setting] : Settings()) {
    out += key + " = " + setting.get(config) + "\n";
  }
  return out;
}

int AutoLevels(int width, int height) {
  int levels = 1;
  int side = std::min(width, height);
  while (levels < 4 && side / 2 >= 64) {
    side /= 2;
    ++levels;
  }
  return levels;
}

View DownsampleView(const View& view) {
  const int w = view.image.width() / 2, h = view.image.height() / 2;
  View out;
  out.image = GrayImage(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.image(x, y) = 0.25f * (view.image(2 * x, 2 * y) + view.image(2 * x + 1, 2 * y) +
                                 view.image(2 * x, 2 * y + 1) +
                                 view.image(2 * x + 1, 2 * y + 1));
    }
  }
  out.camera = view.camera;
  out.camera.fx /= 2.0;
  out.camera.fy /= 2.0;
  out.camera.cx = (view.camera.cx - 0.5) / 2.0;
  out.camera.cy = (view.camera.cy - 0.5) / 2.0;
  out.camera.width = w;
  out.camera.height = h;
  out.depth_min = view.depth_min;
  out.depth_max = view.depth_max;
  return out;
}

std::vector<std::vector<View>> BuildPyramid(const std::vector<View>& views,
                                            int levels) {
  if (levels < 1) throw std::invalid_argument("BuildPyramid: levels < 1");
  std::vector<std::vector<View>> pyramid{views};
  for (int l = 1; l < levels; ++l) {
    std::vector<View> next;
    for (const View& v : pyramid.back()) {
      if (std::min(v.image.width(), v.image.height()) / 2 < 16) {
        throw std::invalid_argument("BuildPyramid: image too small for level count");
      }
      next.push_back(DownsampleView(v));
    }
    pyramid.push_back(std::move(next));
  }
  return pyramid;
}

SceneState UpsampleState(const SceneState& coarse, int width, int height) {
  SceneState fine(width, height, coarse.num_sources);
  for (int y = 0; y < height; ++y) {
    const int cy = std::min(y / 2, coarse.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int cx = std::min(x / 2, coarse.width() - 1);
      fine.depth(x, y) = coarse.depth(cx, cy);
      fine.normal(x, y) = coarse.normal(cx, cy);
      fine.reliable(x, y) = coarse.reliable(cx, cy);
      fine.view_cost(x, y) = coarse.view_cost(cx, cy);
    }
  }
  fine.weights_ready = coarse.weights_ready;
  return fine;
}

PipelineResult RunPipeline(const std::vector<View>& views,
                           const PipelineConfig& config) {
  config.Validate();
  if (views.size() < 2 || views.size() > kMaxSourceViews + 1) {
    throw std::invalid_argument("RunPipeline: need 2..9 views");
  }
  for (const View& v : views) {
    v.camera.Validate();
    if (v.image.width() != views[0].image.width() ||
        v.image.height() != views[0].image.height()) {
      throw std::invalid_argument("RunPipeline: all images must share a size");
    }
    if (!(v.depth_min > 0.0) || !(v.depth_max > v.depth_min)) {
      throw std::invalid_argument("RunPipeline: invalid depth bounds");
    }
  }
  const int width = views[0].image.width(), height = views[0].image.height();
  const int levels = config.pyramid.levels > 0 ? config.pyramid.levels
                                               : AutoLevels(width, height);
  const auto pyramid = BuildPyramid(views, levels);
  const int64_t area = static_cast<int64_t>(width) * height;

  PipelineResult result;
  result.levels = levels;
  if (config.keep_levels) result.level_states.resize(levels);
  std::vector<SceneState> previous;
  for (int l = levels; l >= 1; --l) {
    LevelRunner runner(pyramid[l - 1], l, width, area, config);
    if (l == levels) {
      runner.RunCoarsest(result.stats);
    } else {
      runner.InitializeFrom(std::move(previous));
      runner.RunFiner(result.stats);
    }
    previous.clear();
    for (ViewLevel& d : runner.data()) previous.push_back(d.state);
    if (config.keep_levels) result.level_states[l - 1] = previous;
    if (l == 1) {
      for (ViewLevel& d : runner.data()) {
        result.cues.push_back(std::move(d.cues));
        result.unreliable_seen.push_back(std::move(d.unreliable_seen));
        result.gamma_zero.push_back(std::move(d.gamma_zero));
        result.anchors.push_back(std::move(d.anchors));
      }
    }
  }
  result.states = std::move(previous);
  return result;
}

PointCloud Fuse(const std::vector<SceneState>& states,
                const std::vector<View>& views, const FusionConfig& config) {
  config.Validate();
  if (states.size() != views.size() || states.size() < 2) {
    throw std::invalid_argument("Fuse: need >= 2 matching states and views");
  }
  const size_t n = views.size();
  std::vector<Mask> used;
  std::vector<NormalMap> world_normals;
  for (size_t v = 0; v < n; ++v) {
    used.emplace_back(states[v].width(), states[v].height(), 0);
    NormalMap normals(states[v].width(), states[v].height());
    const Eigen::Matrix3d rt = views[v].camera.rotation.transpose();
    for (size_t i = 0; i < normals.size(); ++i) {
      normals.data()[i] = rt * states[v].normal.data()[i];
    }
    world_normals.push_back(std::move(normals));
  }
  const double cos_tol = std::cos(config.normal_tol);

  PointCloud cloud;
  for (size_t v = 0; v < n; ++v) {
    const SceneState& s = states[v];
    const CameraModel& cam = views[v].camera;
    for (int y = 0; y < s.height(); ++y) {
      for (int x = 0; x < s.width(); ++x) {
        if (used[v](x, y)) continue;
        const double d = s.depth(x, y);
        if (!(d > 0.0)) continue;
        const Eigen::Vector3d point = Unproject({double(x), double(y)}, d, cam);
        const Eigen::Vector3d& normal = world_normals[v](x, y);
        Eigen::Vector3d sum_point = point;
        Eigen::Vector3d sum_normal = normal;
        double sum_gray = views[v].image(x, y);
        int consistent = 0;
        std::vector<std::pair<size_t, Eigen::Vector2i>> matches;
        for (size_t j = 0; j < n; ++j) {
          if (j == v) continue;
          const auto proj = TryProject(point, views[j].camera);
          if (!proj) continue;
          const Eigen::Vector2i q(static_cast<int>(std::lround(proj->pixel.x())),
                                  static_cast<int>(std::lround(proj->pixel.y())));
          if (!states[j].depth.Contains(q)) continue;
          const double dj = states[j].depth(q);
          if (!(dj > 0.0) || std::abs(proj->depth - dj) / dj >= config.depth_rel_tol) {
            continue;
          }
          const Eigen::Vector3d back = Unproject(q.cast<double>(), dj, views[j].camera);
          const auto reproj = TryProject(back, cam);
          if (!reproj ||
              (reproj->pixel - Eigen::Vector2d(x, y)).norm() >= config.reproj_tol) {
            continue;
          }
          if (config.normal_tol > 0.0 &&
              world_normals[j](q).dot(normal) < cos_tol) {
            continue;
          }
          ++consistent;
          sum_point += back;
          sum_normal += world_normals[j](q);
          sum_gray += views[j].image(q);
          matches.emplace_back(j, q);
        }
        if (consistent < config.min_consistent_views) continue;
        for (const auto& [j, q] : matches) used[j](q) = 1;
        const double count = consistent + 1.0;
        cloud.positions.push_back(sum_point / count);
        cloud.normals.push_back(sum_normal.normalized());
        cloud.gray.push_back(static_cast<uint8_t>(
            std::clamp(std::lround(sum_gray / count), 0L, 255L)));
      }
    }
  }
  return cloud;
}

}  // namespace dpe
