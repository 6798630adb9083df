#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpe_mvs/edge_cues.h"
#include "dpe_mvs/evaluation.h"
#include "dpe_mvs/geometry.h"
#include "dpe_mvs/io.h"
#include "dpe_mvs/pipeline.h"
#include "dpe_mvs/scene.h"

namespace fs = std::filesystem;
using namespace dpe;

namespace {

struct CommonOptions {
  uint64_t seed = 42;
  bool seed_set = false;
  std::string config_path;
  std::vector<std::string> overrides;
};

PipelineConfig BuildConfig(const CommonOptions& opts) {
  PipelineConfig config;
  if (!opts.config_path.empty()) ApplyConfigFile(config, opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    }
    ApplyConfigValue(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed_set) config.seed = opts.seed;
  config.Validate();
  return config;
}

std::vector<View> LoadViews(const std::string& camfile) {
  const fs::path base = fs::path(camfile).parent_path();
  std::vector<View> views;
  for (const CameraEntry& entry : ReadCameraFile(camfile)) {
    View view;
    const fs::path image_path = fs::path(entry.image).is_absolute()
                                    ? fs::path(entry.image)
                                    : base / entry.image;
    view.image = ReadPng(image_path.string());
    view.camera = entry.camera;
    view.camera.width = view.image.width();
    view.camera.height = view.image.height();
    view.depth_min = entry.depth_min;
    view.depth_max = entry.depth_max;
    views.push_back(std::move(view));
  }
  return views;
}

std::string ViewDir(int index) { return "view_" + std::to_string(index); }

void WriteState(const fs::path& dir, const SceneState& state) {
  fs::create_directories(dir);
  WritePfm((dir / "depth.pfm").string(), state.depth);
  WritePfm((dir / "normal.pfm").string(), state.normal);
  WritePfm((dir / "cost.pfm").string(), state.cost);
  WritePgm((dir / "reliable.pgm").string(), state.reliable);
}

std::vector<double> ParseThresholds(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size() || !(v > 0.0)) {
      throw std::invalid_argument("invalid threshold '" + item + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw std::invalid_argument("no thresholds given");
  return values;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int RunSynth(const std::string& scene_name, const std::string& out_dir) {
  const RenderedScene scene = RenderScene(LoadScene(scene_name));
  fs::create_directories(out_dir);
  std::vector<CameraEntry> entries;
  for (size_t i = 0; i < scene.views.size(); ++i) {
    const std::string stem = "view_" + std::to_string(i);
    WritePng((fs::path(out_dir) / (stem + ".png")).string(), scene.views[i].image);
    WritePfm((fs::path(out_dir) / (stem + ".gt_depth.pfm")).string(), scene.gt_depth[i]);
    WritePfm((fs::path(out_dir) / (stem + ".gt_normal.pfm")).string(), scene.gt_normal[i]);
    entries.push_back({stem + ".png", scene.views[i].camera, scene.views[i].depth_min,
                       scene.views[i].depth_max});
  }
  WriteCameraFile((fs::path(out_dir) / "cameras.txt").string(), entries);
  WritePly((fs::path(out_dir) / "gt.ply").string(), GroundTruthCloud(scene));
  std::printf("%s: %zu views %dx%d, GT depth range %.4f\n", scene.spec.name.c_str(),
              scene.views.size(), scene.spec.width, scene.spec.height,
              GroundTruthDepthRange(scene));
  return 0;
}

int RunEdges(const std::string& image_path, const std::string& prefix, int level,
             const CommonOptions& opts) {
  const PipelineConfig config = BuildConfig(opts);
  const GrayImage image = ReadPng(image_path);
  const int64_t area = static_cast<int64_t>(image.width()) * image.height();
  const EdgeCues cues =
      ExtractEdgeCues(image, level, area, config.texture, config.coarse, config.seed);
  WritePngMask(prefix + ".fine.png", cues.fine);
  WritePngMask(prefix + ".coarse.png", cues.coarse);
  WritePgm16(prefix + ".regions.pgm", cues.regions.labels);
  WritePfm(prefix + ".prob.pfm", cues.stochastic_prob);
  int low = 0;
  for (int label = 1; label <= cues.regions.count; ++label) low += cues.regions.low_texture[label];
  std::printf("regions %d (low-texture %d)\n", cues.regions.count, low);
  return 0;
}

void WriteAnchors(const std::string& path, const PipelineResult& result, int ref) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const AnchorRecord& rec : result.anchors[ref]) {
    out << rec.pixel.x() << ' ' << rec.pixel.y() << ' ' << rec.anchors.size();
    for (const Eigen::Vector2i& a : rec.anchors) out << ' ' << a.x() << ' ' << a.y();
    out << '\n';
  }
}

int RunDepth(const std::string& camfile, int ref, const std::string& out_dir,
             bool dump_levels, const std::string& anchors_path,
             const CommonOptions& opts) {
  PipelineConfig config = BuildConfig(opts);
  config.keep_levels = dump_levels;
  const std::vector<View> views = LoadViews(camfile);
  const int n = static_cast<int>(views.size());
  if (ref >= n) throw std::invalid_argument("--ref out of range");
  const PipelineResult result = RunPipeline(views, config);
  for (int v = 0; v < n; ++v) {
    if (ref >= 0 && v != ref) continue;
    WriteState(fs::path(out_dir) / ViewDir(v), result.states[v]);
    if (dump_levels) {
      for (int l = 0; l < result.levels; ++l) {
        WriteState(fs::path(out_dir) / ViewDir(v) / ("level_" + std::to_string(l + 1)),
                   result.level_states[l][v]);
      }
    }
  }
  if (!anchors_path.empty()) WriteAnchors(anchors_path, result, ref >= 0 ? ref : 0);
  for (const LevelStats& s : result.stats) {
    std::printf("level %d view %d: reliable %.3f, unreliable %d, anchored %d, "
                "center discarded %d, %.2f s\n",
                s.level, s.view, s.reliable_fraction, s.unreliable, s.with_anchors,
                s.gamma_zero, s.seconds);
  }
  return 0;
}

int RunFuse(const std::string& camfile, const std::string& depth_dir,
            const std::string& out_path, const CommonOptions& opts) {
  const PipelineConfig config = BuildConfig(opts);
  const std::vector<View> views = LoadViews(camfile);
  std::vector<SceneState> states;
  for (size_t v = 0; v < views.size(); ++v) {
    const fs::path dir = fs::path(depth_dir) / ViewDir(static_cast<int>(v));
    const Grid<float> depth = ReadPfm((dir / "depth.pfm").string());
    const NormalMap normal = ReadPfm3((dir / "normal.pfm").string());
    SceneState state(depth.width(), depth.height(), static_cast<int>(views.size()) - 1);
    for (size_t i = 0; i < depth.size(); ++i) {
      state.depth.data()[i] = depth.data()[i];
      state.normal.data()[i] = normal.data()[i];
    }
    states.push_back(std::move(state));
  }
  const PointCloud cloud = Fuse(states, views, config.fusion);
  WritePly(out_path, cloud);
  std::printf("fused %zu points\n", cloud.size());
  return 0;
}

int RunEval(const std::string& cloud_path, const std::string& gt_path,
            const std::string& thresholds, const std::string& csv_path) {
  const std::vector<double> ts = ParseThresholds(thresholds);
  const EvalReport report = Evaluate(ReadPly(cloud_path), ReadPly(gt_path), ts);
  std::fputs(FormatReport(report).c_str(), stdout);
  WriteText(csv_path.empty() ? cloud_path + ".eval.csv" : csv_path, EvalReportCsv(report));
  return 0;
}

int RunAblate(const std::string& scene_name, const std::string& out_path,
              const std::string& thresholds, bool all_sets,
              const CommonOptions& opts) {
  const PipelineConfig config = BuildConfig(opts);
  const RenderedScene scene = RenderScene(LoadScene(scene_name));
  std::vector<double> ts;
  if (thresholds.empty()) {
    ts.push_back(0.01 * GroundTruthDepthRange(scene));
  } else {
    ts = ParseThresholds(thresholds);
  }
  std::vector<Toggles> sets;
  if (all_sets) {
    sets = AllToggleSets();
  } else {
    sets = {{false, false, false, false},
            {true, false, false, false},
            {true, true, false, false},
            {true, true, true, false},
            {true, true, true, true}};
  }
  const std::vector<AblationRow> rows = RunAblation(scene, config, sets, ts);
  std::fputs(AblationTable(rows).c_str(), stdout);
  WriteText(out_path, AblationCsv(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-guided deformable PatchMatch multi-view stereo"};
  app.require_subcommand(1);
  CommonOptions opts;
  app.add_option_function<uint64_t>(
         "--seed", [&](uint64_t s) { opts.seed = s; opts.seed_set = true; },
         "Master random seed")
      ->configurable(false);
  app.add_option("--config", opts.config_path, "Text file of key = value settings")
      ->check(CLI::ExistingFile);
  app.add_option("--set", opts.overrides, "Extra key=value setting (repeatable)");

  std::string scene_name, out, image_path, prefix, camfile, depth_dir, cloud_path,
      gt_path, anchors_path, csv_path;
  std::string thresholds = "0.01,0.02,0.05";
  std::string ablate_thresholds;
  int level = 1, ref = -1;
  bool dump_levels = false, all_sets = false;

  CLI::App* synth = app.add_subcommand("synth", "Render a corpus scene or scene file");
  synth->add_option("scene", scene_name, "Corpus name or scene file")->required();
  synth->add_option("--out", out, "Output directory")->required();

  CLI::App* edges = app.add_subcommand("edges", "Extract fine/coarse edge cues");
  edges->add_option("image", image_path, "Grayscale PNG")->required()->check(CLI::ExistingFile);
  edges->add_option("--out-prefix", prefix, "Output path prefix")->required();
  edges->add_option("--level", level, "Pyramid level the image belongs to")
      ->check(CLI::Range(1, 8));

  CLI::App* depth = app.add_subcommand("depth", "Estimate depth/normal maps");
  depth->add_option("camfile", camfile, "Camera file")->required()->check(CLI::ExistingFile);
  depth->add_option("--ref", ref, "View to write (-1 writes all views)");
  depth->add_option("--out", out, "Output directory")->required();
  depth->add_flag("--dump-levels", dump_levels, "Also write every pyramid level");
  depth->add_option("--dump-anchors", anchors_path,
                    "Write the anchors of unreliable pixels of the reference view");

  CLI::App* fuse = app.add_subcommand("fuse", "Fuse depth maps into a point cloud");
  fuse->add_option("camfile", camfile, "Camera file")->required()->check(CLI::ExistingFile);
  fuse->add_option("depthdir", depth_dir, "Directory written by 'depth'")
      ->required()->check(CLI::ExistingDirectory);
  fuse->add_option("--out", out, "Output PLY")->required();

  CLI::App* eval = app.add_subcommand("eval", "Score a cloud against ground truth");
  eval->add_option("cloud", cloud_path, "Reconstructed PLY")->required()->check(CLI::ExistingFile);
  eval->add_option("gt", gt_path, "Ground-truth PLY")->required()->check(CLI::ExistingFile);
  eval->add_option("--thresholds", thresholds, "Comma-separated distance thresholds");
  eval->add_option("--csv", csv_path, "CSV output (default <cloud>.eval.csv)");

  CLI::App* ablate = app.add_subcommand("ablate", "Compare component toggle sets");
  ablate->add_option("scene", scene_name, "Corpus name or scene file")->required();
  ablate->add_option("--out", out, "CSV output")->required();
  ablate->add_option("--thresholds", ablate_thresholds,
                     "Comma-separated thresholds (default 1% of the GT depth range)");
  ablate->add_flag("--all", all_sets, "Run all 16 toggle combinations");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return RunSynth(scene_name, out);
    if (*edges) return RunEdges(image_path, prefix, level, opts);
    if (*depth) return RunDepth(camfile, ref, out, dump_levels, anchors_path, opts);
    if (*fuse) return RunFuse(camfile, depth_dir, out, opts);
    if (*eval) return RunEval(cloud_path, gt_path, thresholds, csv_path);
    if (*ablate) return RunAblate(scene_name, out, ablate_thresholds, all_sets, opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
