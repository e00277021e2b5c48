#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "sortcell/backends.hpp"
#include "sortcell/bench.hpp"
#include "sortcell/config.hpp"
#include "sortcell/render.hpp"
#include "sortcell/runner.hpp"
#include "sortcell/segmentation.hpp"

namespace py = pybind11;
using namespace sortcell;
using nlohmann::json;

namespace {

py::dict parsed_to_dict(const classify::ParsedLabel& label) {
  py::dict d;
  d["valid"] = label.valid();
  if (label.valid()) {
    d["label"] = std::string(to_string(*label.label));
  } else {
    d["reason"] = label.to_string().substr(8);  // strip "invalid:"
  }
  return d;
}

cellsim::WorldState world_from_arg(const std::string& world_json) {
  return cellsim::world_from_json(world_json);
}

py::tuple render_arrays(const std::string& world_json, const std::string& camera) {
  const auto world = world_from_arg(world_json);
  const CameraId id = camera == "cam1" ? CameraId::Cam1 : CameraId::Cam2;
  const RgbdFrame frame = cellsim::render_camera(world, id);

  py::array_t<uint8_t> rgb({frame.height, frame.width, 3});
  std::copy(frame.rgb.begin(), frame.rgb.end(), rgb.mutable_data());
  py::array_t<float> depth({frame.height, frame.width});
  std::copy(frame.depth_mm.begin(), frame.depth_mm.end(), depth.mutable_data());
  return py::make_tuple(rgb, depth);
}

py::list run_cell(const std::string& config_json, uint64_t seed) {
  cli::CliConfig config;
  cli::apply_config_json(config, json::parse(config_json), ".");
  orchestrator::RunConfig run = config.run;
  run.out_dir = config.out_dir;
  const auto result = orchestrator::run_until_empty(run, seed);
  if (result.aborted) throw std::runtime_error("run aborted: " + result.abort_reason);
  py::list cycles;
  for (const auto& cycle : result.cycles) {
    py::dict d;
    d["item"] = cycle.item_id;
    d["true_class"] = std::string(to_string(cycle.true_class));
    d["bin"] = std::string(to_string(cycle.destination_bin));
    d["predicted"] = parsed_to_dict(cycle.predicted);
    d["candidate_retries"] = cycle.candidate_retries;
    d["pick_retries"] = cycle.pick_retries;
    cycles.append(d);
  }
  return cycles;
}

py::list evaluate_manifest(const std::string& manifest_path,
                           const std::string& backend_kind,
                           const std::string& source, uint64_t seed,
                           int concurrency) {
  const auto dataset = bench::load_manifest(manifest_path);
  classify::BackendDescriptor desc;
  if (backend_kind == "mock") {
    desc.kind = classify::BackendDescriptor::Kind::MockProfile;
    desc.profile_path = source;
    desc.mock_seed = seed;
  } else if (backend_kind == "replay") {
    desc.kind = classify::BackendDescriptor::Kind::ReplayLog;
    desc.log_path = source;
  } else if (backend_kind == "live") {
    desc.kind = classify::BackendDescriptor::Kind::LiveHttp;
    desc.endpoint = source;
  } else {
    throw std::invalid_argument("backend_kind must be mock, replay or live");
  }
  const auto backend = classify::make_backend(desc);
  bench::EvaluateOptions opts;
  opts.concurrency = concurrency;
  opts.read_images = backend_kind == "live";
  const auto result = bench::evaluate(*backend, dataset, opts);

  py::list records;
  for (const auto& rec : result.log.records) {
    py::dict d;
    d["id"] = rec.id;
    d["model"] = rec.model;
    d["raw"] = rec.raw;
    d["parsed"] = rec.parsed.to_string();
    d["latency_s"] = rec.latency_s;
    records.append(d);
  }
  return records;
}

py::dict stats_dict(const std::vector<double>& latencies) {
  const auto stats = bench::timing_stats(latencies);
  py::dict d;
  d["mean_s"] = stats.mean_s;
  d["p10_s"] = stats.p10_s;
  d["p90_s"] = stats.p90_s;
  d["n"] = stats.n;
  return d;
}

py::array_t<double> segment_to_points(py::array_t<float> depth,
                                      py::array_t<uint8_t> rgb,
                                      py::array_t<float> base_depth,
                                      py::array_t<uint8_t> base_rgb,
                                      double depth_delta_mm, int rgb_delta) {
  const auto d = depth.unchecked<2>();
  const auto c = rgb.unchecked<3>();
  const auto bd = base_depth.unchecked<2>();
  const auto bc = base_rgb.unchecked<3>();
  const int height = static_cast<int>(d.shape(0));
  const int width = static_cast<int>(d.shape(1));

  RgbdFrame frame = RgbdFrame::blank(CameraId::Cam2, width, height, {0, 0, 0}, 0);
  segmentation::SegBaseline baseline;
  baseline.camera_id = CameraId::Cam2;
  baseline.width = width;
  baseline.height = height;
  baseline.depth_mm.resize(size_t(width) * height);
  baseline.rgb.resize(size_t(width) * height * 3);
  baseline.frame_count_used = 1;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      frame.set_depth(u, v, d(v, u));
      frame.set_color(u, v, {c(v, u, 0), c(v, u, 1), c(v, u, 2)});
      baseline.depth_mm[size_t(v) * width + u] = bd(v, u);
      for (int ch = 0; ch < 3; ++ch)
        baseline.rgb[(size_t(v) * width + u) * 3 + ch] = bc(v, u, ch);
    }
  }
  // Camera is only needed for back-projection; use the standard Cam 2 pose
  // scaled to the supplied resolution.
  CameraModel cam = CameraModel::top_down(CameraId::Cam2, 1000, 250, 800,
                                          580.0 * width / 640.0,
                                          580.0 * width / 640.0, width, height);
  const auto cloud = segmentation::segment(
      frame, baseline, {depth_delta_mm, rgb_delta}, cam);

  py::array_t<double> out({static_cast<py::ssize_t>(cloud.points.size()),
                           static_cast<py::ssize_t>(6)});
  auto w = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < py::ssize_t(cloud.points.size()); ++i) {
    const auto& p = cloud.points[size_t(i)];
    w(i, 0) = p.x;
    w(i, 1) = p.y;
    w(i, 2) = p.z;
    w(i, 3) = p.r;
    w(i, 4) = p.g;
    w(i, 5) = p.b;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Textile sorting cell simulator and classifier benchmark";

  m.def("canonical_classes", [] {
    py::list classes;
    for (const GarmentClass c : kClassOrder) classes.append(std::string(to_string(c)));
    return classes;
  });

  m.def(
      "build_prompt",
      [] {
        const auto req = classify::build_prompt();
        py::dict d;
        d["system"] = req.system_prompt;
        d["user"] = req.user_prompt;
        return d;
      },
      "Chat prompt sent for every classification call.");

  m.def(
      "parse_response",
      [](const std::string& text, bool lenient_punctuation) {
        classify::ParseOptions opts;
        opts.lenient_punctuation = lenient_punctuation;
        return parsed_to_dict(classify::parse_text(text, opts));
      },
      py::arg("text"), py::arg("lenient_punctuation") = false,
      "Strict single-word label parsing.");

  m.def(
      "spawn_scene",
      [](const std::string& scene_json, uint64_t seed) {
        const auto spec = cli::scene_from_json(json::parse(scene_json));
        return cellsim::world_to_json(cellsim::spawn_scene(spec, seed));
      },
      py::arg("scene_json"), py::arg("seed"),
      "Deterministic scene construction; returns the world as JSON.");

  m.def("render_camera", &render_arrays, py::arg("world_json"), py::arg("camera"),
        "Renders (rgb, depth) numpy arrays for 'cam1' or 'cam2'.");

  m.def("run_cell", &run_cell, py::arg("config_json"), py::arg("seed"),
        "Runs the full inspection loop; returns the cycle reports.");

  m.def("evaluate", &evaluate_manifest, py::arg("manifest"), py::arg("backend"),
        py::arg("source") = "", py::arg("seed") = 0, py::arg("concurrency") = 1,
        "Evaluates a backend over a manifest; returns response records.");

  m.def("timing_stats", &stats_dict, py::arg("latencies"),
        "Mean and P10/P90 percentiles (linear interpolation).");

  m.def("percentile", &bench::percentile, py::arg("values"), py::arg("q"));

  m.def("segment", &segment_to_points, py::arg("depth"), py::arg("rgb"),
        py::arg("baseline_depth"), py::arg("baseline_rgb"),
        py::arg("depth_delta_mm") = 5.0, py::arg("rgb_delta") = 15,
        "Background subtraction; returns an Nx6 array (x y z r g b).");

  m.attr("__version__") = "0.1.0";
}
