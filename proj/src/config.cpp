#include "sortcell/config.hpp"

#include <fstream>
#include <set>

namespace sortcell::cli {

using nlohmann::json;

cellsim::SceneSpec scene_from_json(const json& j) {
  cellsim::SceneSpec spec;
  if (j.contains("counts")) {
    for (const auto& [name, count] : j.at("counts").items()) {
      const auto cls = class_from_string(name);
      if (!cls) throw std::invalid_argument("scene counts: unknown class '" + name + "'");
      spec.counts[*cls] = count.get<int>();
    }
  }
  spec.foreign_count = j.value("foreign", 0);
  spec.entangle_p = j.value("entangle_p", 0.0);
  if (j.contains("entangled_pairs"))
    spec.entangled_pairs = j.at("entangled_pairs").get<int>();
  return spec;
}

json scene_to_json(const cellsim::SceneSpec& spec) {
  json counts;
  for (const auto& [cls, n] : spec.counts)
    counts[std::string(to_string(cls))] = n;
  json j;
  j["counts"] = counts;
  j["foreign"] = spec.foreign_count;
  j["entangle_p"] = spec.entangle_p;
  if (spec.entangled_pairs) j["entangled_pairs"] = *spec.entangled_pairs;
  return j;
}

cellsim::SceneSpec load_scene_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scene file: " + path.string());
  return scene_from_json(json::parse(f));
}

namespace {

classify::BackendDescriptor backend_from_json(const json& j,
                                              const std::filesystem::path& base_dir) {
  classify::BackendDescriptor desc;
  const std::string kind = j.value("kind", "mock");
  if (kind == "mock") {
    desc.kind = classify::BackendDescriptor::Kind::MockProfile;
  } else if (kind == "live") {
    desc.kind = classify::BackendDescriptor::Kind::LiveHttp;
  } else if (kind == "replay") {
    desc.kind = classify::BackendDescriptor::Kind::ReplayLog;
  } else {
    throw std::invalid_argument("backend kind must be mock, live or replay");
  }
  desc.endpoint = j.value("endpoint", "");
  if (j.contains("profile"))
    desc.profile_path = (base_dir / j.at("profile").get<std::string>()).string();
  if (j.contains("log"))
    desc.log_path = (base_dir / j.at("log").get<std::string>()).string();
  desc.model_name = j.value("model", std::string("mock"));
  desc.timeout_s = j.value("timeout_s", 30.0);
  desc.mock_seed = j.value("mock_seed", 0ull);
  desc.mock_latency_base_s = j.value("mock_latency_base_s", 0.5);
  desc.mock_latency_jitter_s = j.value("mock_latency_jitter_s", 0.3);
  return desc;
}

}  // namespace

void apply_config_json(CliConfig& config, const json& j,
                       const std::filesystem::path& base_dir) {
  static const std::set<std::string> kKnown = {
      "seed",           "out_dir",          "scene",
      "thresholds",     "budgets",          "backend",
      "pick_failure_rate", "pick_failure_applies_in_b", "spread_factor",
      "baseline_frames", "service_timeout_s", "bbox_margin_px",
      "lenient_punctuation"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.count(key))
      throw std::invalid_argument("unknown config key '" + key + "'");
  }

  if (j.contains("seed")) config.seed = j.at("seed").get<uint64_t>();
  if (j.contains("out_dir")) config.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("scene")) {
    const json& scene = j.at("scene");
    config.run.scene = scene.is_string()
                           ? load_scene_file(base_dir / scene.get<std::string>())
                           : scene_from_json(scene);
  }
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    config.run.seg_thresholds.depth_delta_mm =
        t.value("depth_delta_mm", config.run.seg_thresholds.depth_delta_mm);
    config.run.seg_thresholds.rgb_delta =
        t.value("rgb_delta", config.run.seg_thresholds.rgb_delta);
  }
  if (j.contains("budgets")) {
    const json& b = j.at("budgets");
    config.run.budgets.candidate_attempts =
        b.value("candidate_attempts", config.run.budgets.candidate_attempts);
    config.run.budgets.pick_retries =
        b.value("pick_retries", config.run.budgets.pick_retries);
  }
  if (j.contains("backend"))
    config.run.backend = backend_from_json(j.at("backend"), base_dir);
  if (j.contains("pick_failure_rate"))
    config.run.pick_failure_rate = j.at("pick_failure_rate").get<double>();
  if (j.contains("pick_failure_applies_in_b"))
    config.run.pick_failure_applies_in_b =
        j.at("pick_failure_applies_in_b").get<bool>();
  if (j.contains("spread_factor"))
    config.run.spread_factor = j.at("spread_factor").get<double>();
  if (j.contains("baseline_frames"))
    config.run.baseline_frames = j.at("baseline_frames").get<int>();
  if (j.contains("service_timeout_s"))
    config.run.service_timeout_s = j.at("service_timeout_s").get<double>();
  if (j.contains("bbox_margin_px"))
    config.run.bbox_margin_px = j.at("bbox_margin_px").get<int>();
  if (j.contains("lenient_punctuation"))
    config.run.parse.lenient_punctuation = j.at("lenient_punctuation").get<bool>();
}

CliConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path.string());
  CliConfig config;
  apply_config_json(config, json::parse(f), path.parent_path());
  return config;
}

}  // namespace sortcell::cli
