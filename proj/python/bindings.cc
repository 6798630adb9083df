#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpe_mvs/deformable_pm.h"
#include "dpe_mvs/edge_cues.h"
#include "dpe_mvs/edge_sampling.h"
#include "dpe_mvs/evaluation.h"
#include "dpe_mvs/geometry.h"
#include "dpe_mvs/io.h"
#include "dpe_mvs/patch_match.h"
#include "dpe_mvs/pipeline.h"
#include "dpe_mvs/planar_model.h"
#include "dpe_mvs/scene.h"

namespace py = pybind11;

namespace {

template <typename T, typename Out = T>
py::array_t<Out> ToArray(const dpe::Grid<T>& grid) {
  py::array_t<Out> out({grid.height(), grid.width()});
  auto view = out.template mutable_unchecked<2>();
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) view(y, x) = static_cast<Out>(grid(x, y));
  }
  return out;
}

py::array_t<double> NormalsToArray(const dpe::NormalMap& normals) {
  py::array_t<double> out({normals.height(), normals.width(), 3});
  auto view = out.mutable_unchecked<3>();
  for (int y = 0; y < normals.height(); ++y) {
    for (int x = 0; x < normals.width(); ++x) {
      for (int c = 0; c < 3; ++c) view(y, x, c) = normals(x, y)[c];
    }
  }
  return out;
}

dpe::GrayImage ToImage(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2D grayscale array");
  const auto view = a.unchecked<2>();
  dpe::GrayImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) img(x, y) = view(y, x);
  }
  return img;
}

py::array_t<double> PointsToArray(const std::vector<Eigen::Vector3d>& points) {
  py::array_t<double> out({static_cast<py::ssize_t>(points.size()), py::ssize_t{3}});
  auto view = out.mutable_unchecked<2>();
  for (size_t i = 0; i < points.size(); ++i) {
    for (int c = 0; c < 3; ++c) view(i, c) = points[i][c];
  }
  return out;
}

dpe::PointCloud CloudFromArray(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw std::invalid_argument("expected an (N, 3) array");
  const auto view = a.unchecked<2>();
  dpe::PointCloud cloud;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    cloud.positions.emplace_back(view(i, 0), view(i, 1), view(i, 2));
    cloud.normals.emplace_back(0, 0, 1);
    cloud.gray.push_back(0);
  }
  return cloud;
}

dpe::PipelineConfig MakeConfig(const std::map<std::string, std::string>& overrides) {
  dpe::PipelineConfig config;
  for (const auto& [key, value] : overrides) dpe::ApplyConfigValue(config, key, value);
  return config;
}

py::dict SceneToDict(const dpe::RenderedScene& scene) {
  py::list images, depths, normals, cameras, plane_ids;
  for (size_t v = 0; v < scene.views.size(); ++v) {
    images.append(ToArray(scene.views[v].image));
    depths.append(ToArray(scene.gt_depth[v]));
    normals.append(NormalsToArray(scene.gt_normal[v]));
    plane_ids.append(ToArray(scene.plane_id[v]));
    cameras.append(scene.views[v].camera);
  }
  py::dict d;
  d["name"] = scene.spec.name;
  d["images"] = images;
  d["depth"] = depths;
  d["normal"] = normals;
  d["plane_id"] = plane_ids;
  d["cameras"] = cameras;
  d["depth_min"] = scene.spec.depth_min;
  d["depth_max"] = scene.spec.depth_max;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-view stereo with edge-guided sampling and deformable patches";

  py::class_<dpe::CameraModel>(m, "Camera")
      .def(py::init<>())
      .def_readwrite("fx", &dpe::CameraModel::fx)
      .def_readwrite("fy", &dpe::CameraModel::fy)
      .def_readwrite("cx", &dpe::CameraModel::cx)
      .def_readwrite("cy", &dpe::CameraModel::cy)
      .def_readwrite("rotation", &dpe::CameraModel::rotation)
      .def_readwrite("center", &dpe::CameraModel::center)
      .def_readwrite("width", &dpe::CameraModel::width)
      .def_readwrite("height", &dpe::CameraModel::height)
      .def("validate", &dpe::CameraModel::Validate)
      .def("ray", &dpe::CameraModel::Ray, py::arg("pixel"))
      .def("__repr__", [](const dpe::CameraModel& c) {
        return "Camera(fx=" + std::to_string(c.fx) + ", fy=" + std::to_string(c.fy) +
               ", size=" + std::to_string(c.width) + "x" + std::to_string(c.height) + ")";
      });

  py::register_exception<dpe::GeometryError>(m, "GeometryError", PyExc_ValueError);

  m.def(
      "project",
      [](const Eigen::Vector3d& point, const dpe::CameraModel& camera) {
        const dpe::Projection p = dpe::Project(point, camera);
        return py::make_tuple(p.pixel, p.depth);
      },
      py::arg("point"), py::arg("camera"), "Pixel and z-depth of a world point.");
  m.def("unproject", &dpe::Unproject, py::arg("pixel"), py::arg("depth"), py::arg("camera"));
  m.def(
      "homography",
      [](const dpe::CameraModel& ref, const dpe::CameraModel& src, const Eigen::Vector2d& pixel,
         const Eigen::Vector3d& normal, double depth) {
        return dpe::HomographyForPlane(ref, src, pixel, {normal.normalized(), depth});
      },
      py::arg("ref"), py::arg("src"), py::arg("pixel"), py::arg("normal"), py::arg("depth"),
      "Plane-induced homography for a camera-frame normal and the depth at `pixel`.");

  m.def(
      "ncc_cost",
      [](std::vector<float> a, std::vector<float> b) { return dpe::NccCost(a, b); },
      py::arg("ref"), py::arg("src"));
  m.def("view_weight", &dpe::ViewWeight, py::arg("cost"), py::arg("variance") = 0.36);
  m.def(
      "stochastic_probability",
      [](double density) {
        return dpe::StochasticProbabilityFromDensity(density, dpe::TextureConfig{});
      },
      py::arg("density"));
  m.def(
      "edge_cues",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
         uint64_t seed) {
        const dpe::GrayImage img = ToImage(image);
        const dpe::EdgeCues cues = dpe::ExtractEdgeCues(
            img, 1, int64_t(img.width()) * img.height(), {}, {}, seed);
        py::dict d;
        d["fine"] = ToArray(cues.fine);
        d["coarse"] = ToArray(cues.coarse);
        d["labels"] = ToArray(cues.regions.labels);
        d["stochastic_prob"] = ToArray(cues.stochastic_prob);
        d["stochastic"] = ToArray(cues.stochastic);
        return d;
      },
      py::arg("image"), py::arg("seed") = 42);

  m.def("exclusion_radius", &dpe::ExclusionRadius, py::arg("t_iter"));
  m.def(
      "extended_params",
      [](int d_fe, int image_width, int level) {
        dpe::SamplingConfig config;
        config.image_width = image_width;
        config.level = level;
        const dpe::ExtendedParams p = dpe::ComputeExtendedParams(d_fe, config);
        return py::make_tuple(p.count, p.step);
      },
      py::arg("d_fe"), py::arg("image_width"), py::arg("level") = 1);
  m.def("allocate_search", &dpe::AllocateSearch, py::arg("d_a"), py::arg("d_b"),
        py::arg("eta") = 4);
  m.def(
      "adaptive_radius",
      [](double area, std::vector<double> anchors, std::vector<int> fine,
         std::vector<int> coarse, int fixed_radius, double omega, bool stochastic,
         bool low_texture) {
        return dpe::AdaptiveRadius(area, anchors, fine, coarse, fixed_radius, omega,
                                   stochastic, low_texture);
      },
      py::arg("triangle_area"), py::arg("anchor_distances"), py::arg("fine_distances"),
      py::arg("coarse_distances"), py::arg("fixed_radius") = 5, py::arg("omega") = 2.5,
      py::arg("stochastic") = false, py::arg("low_texture") = false);
  m.def(
      "deformable_cost",
      [](std::optional<double> center, std::vector<double> anchors, double lambda) {
        return dpe::CombineDeformableCost(center, anchors, lambda);
      },
      py::arg("center"), py::arg("anchor_costs"), py::arg("lambda_") = 0.5);

  m.def("corpus_names", &dpe::CorpusNames);
  m.def(
      "render_scene",
      [](const std::string& name_or_path) {
        return SceneToDict(dpe::RenderScene(dpe::LoadScene(name_or_path)));
      },
      py::arg("scene"), "Renders a corpus scene or scene file to images and ground truth.");
  m.def(
      "default_config",
      []() { return dpe::ConfigToString(dpe::PipelineConfig{}); },
      "All settings as `key = value` lines.");
  m.def(
      "run_scene",
      [](const std::string& name_or_path, const std::map<std::string, std::string>& overrides) {
        const dpe::PipelineConfig config = MakeConfig(overrides);
        dpe::SceneRun run;
        dpe::RenderedScene scene;
        {
          py::gil_scoped_release release;
          scene = dpe::RenderScene(dpe::LoadScene(name_or_path));
          run = dpe::RunScene(scene, config);
        }
        py::list depth, normal, reliable;
        for (const dpe::SceneState& s : run.result.states) {
          depth.append(ToArray(s.depth));
          normal.append(NormalsToArray(s.normal));
          reliable.append(ToArray(s.reliable));
        }
        py::dict d;
        d["depth"] = depth;
        d["normal"] = normal;
        d["reliable"] = reliable;
        d["points"] = PointsToArray(run.cloud.positions);
        d["seconds"] = run.seconds;
        d["scene"] = SceneToDict(scene);
        return d;
      },
      py::arg("scene"), py::arg("config") = std::map<std::string, std::string>{},
      "Runs the full pipeline and fusion on a rendered scene. `config` maps setting keys "
      "to values, e.g. {'toggles.po': 'false'}.");
  m.def(
      "evaluate",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& cloud,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& gt,
         std::vector<double> thresholds) {
        const dpe::EvalReport report =
            dpe::Evaluate(CloudFromArray(cloud), CloudFromArray(gt), thresholds);
        py::list rows;
        for (const dpe::ThresholdScore& r : report.rows) {
          py::dict row;
          row["threshold"] = r.threshold;
          row["accuracy"] = r.accuracy;
          row["completeness"] = r.completeness;
          row["f1"] = r.f1;
          rows.append(row);
        }
        return rows;
      },
      py::arg("cloud"), py::arg("gt"), py::arg("thresholds"));
  m.def(
      "read_pfm", [](const std::string& path) { return ToArray(dpe::ReadPfm(path)); },
      py::arg("path"));
  m.def(
      "read_ply",
      [](const std::string& path) { return PointsToArray(dpe::ReadPly(path).positions); },
      py::arg("path"));
}
