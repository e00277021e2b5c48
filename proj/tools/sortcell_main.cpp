#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "sortcell/bench.hpp"
#include "sortcell/config.hpp"
#include "sortcell/errors.hpp"
#include "sortcell/image_io.hpp"
#include "sortcell/report.hpp"
#include "sortcell/runner.hpp"
#include "sortcell/segmentation.hpp"

namespace fs = std::filesystem;
using namespace sortcell;

namespace {

struct BackendFlags {
  std::string kind;
  std::string endpoint;
  std::string model;
  std::string profile;
  std::string replay_log;
  std::optional<double> timeout_s;
  std::optional<uint64_t> mock_seed;
};

void add_backend_flags(CLI::App* app, BackendFlags& flags) {
  app->add_option("--backend", flags.kind, "Classifier backend: mock, live or replay");
  app->add_option("--endpoint", flags.endpoint,
                  "Live chat endpoint, e.g. http://127.0.0.1:11434 "
                  "(SORTCELL_ENDPOINT overrides)");
  app->add_option("--timeout-s", flags.timeout_s, "Classifier call timeout in seconds");
  app->add_option("--model", flags.model, "Model name sent with each chat call");
  app->add_option("--profile", flags.profile,
                  "Confusion profile JSON for the mock backend (default identity)");
  app->add_option("--replay-log", flags.replay_log,
                  "Response log JSONL replayed by the replay backend");
  app->add_option("--mock-seed", flags.mock_seed, "Seed for the mock backend draws");
}

void apply_backend_flags(classify::BackendDescriptor& desc, const BackendFlags& flags) {
  if (!flags.kind.empty()) {
    if (flags.kind == "mock") desc.kind = classify::BackendDescriptor::Kind::MockProfile;
    else if (flags.kind == "live") desc.kind = classify::BackendDescriptor::Kind::LiveHttp;
    else if (flags.kind == "replay") desc.kind = classify::BackendDescriptor::Kind::ReplayLog;
    else throw CLI::ValidationError("--backend must be mock, live or replay");
  }
  if (!flags.endpoint.empty()) desc.endpoint = flags.endpoint;
  if (const char* env = std::getenv("SORTCELL_ENDPOINT"); env && *env)
    desc.endpoint = env;
  if (!flags.model.empty()) desc.model_name = flags.model;
  if (!flags.profile.empty()) desc.profile_path = flags.profile;
  if (!flags.replay_log.empty()) desc.log_path = flags.replay_log;
  if (flags.timeout_s) desc.timeout_s = *flags.timeout_s;
  if (flags.mock_seed) desc.mock_seed = *flags.mock_seed;
}

int run_cell(const cli::CliConfig& config) {
  orchestrator::RunConfig run_config = config.run;
  run_config.out_dir = config.out_dir;
  fs::create_directories(config.out_dir);

  const auto result = orchestrator::run_until_empty(run_config, config.seed);
  if (result.aborted) {
    std::cerr << "run aborted: " << result.abort_reason << "\n";
    return 1;
  }

  std::cout << "cycles: " << result.cycles.size() << "\n";
  for (const auto& cycle : result.cycles) {
    std::cout << "  " << cycle.item_id << " (" << to_string(cycle.true_class)
              << ") -> bin " << to_string(cycle.destination_bin) << " ["
              << cycle.predicted.to_string() << "]\n";
  }
  std::cout << "remaining in basket: " << result.final_world.items_in("A").size()
            << "\n";
  std::cout << "run log: " << (fs::path(config.out_dir) / "run_log.jsonl").string()
            << "\n";
  return result.clean_shutdown ? 0 : 1;
}

int run_segment(const std::string& baseline_dir,
                const std::vector<std::string>& frame_pngs, double depth_mm,
                int rgb_delta, const std::string& out_dir) {
  const auto baseline = segmentation::load_baseline(baseline_dir);
  segmentation::SegThresholds thr{depth_mm, rgb_delta};
  // Frames come from fixture pairs: <stem>.png + <stem>.pgm.
  const CameraModel camera = cellsim::CellLayout::standard().cameras.at(
      baseline.camera_id);
  fs::create_directories(out_dir);
  for (const std::string& png : frame_pngs) {
    fs::path png_path(png);
    fs::path pgm_path = png_path;
    pgm_path.replace_extension(".pgm");
    const RgbdFrame frame = import_frame(baseline.camera_id, png_path, pgm_path);
    const auto cloud = segmentation::segment(frame, baseline, thr, camera);
    fs::path out = fs::path(out_dir) / png_path.filename().replace_extension(".ply");
    segmentation::export_cloud(cloud, out);
    std::cout << out.string() << ": " << cloud.points.size() << " points\n";
  }
  return 0;
}

bench::ModelResults results_for(const bench::ResponseLog& log,
                                const std::vector<bench::DatasetRecord>& dataset) {
  bench::ModelResults r;
  r.model = log.model;
  r.hardware = log.hardware;
  r.matrix = bench::confusion_matrix(log, dataset);
  std::vector<double> latencies;
  for (const auto& rec : log.records) latencies.push_back(rec.latency_s);
  r.timing = bench::timing_stats(latencies);
  return r;
}

std::vector<bench::ReferenceRow> load_reference_rows(
    const nlohmann::json& j, std::map<GarmentClass, int>& class_counts,
    int& stated_total) {
  std::vector<bench::ReferenceRow> rows;
  for (const auto& [name, count] : j.at("class_counts").items()) {
    const auto cls = class_from_string(name);
    if (cls) class_counts[*cls] = count.get<int>();
  }
  stated_total = j.at("total").get<int>();
  for (const auto& m : j.at("models")) {
    bench::ReferenceRow row;
    row.model = m.at("name").get<std::string>();
    row.overall_pct = m.at("overall_pct").get<double>();
    for (const auto& [name, pct] : m.at("per_class_pct").items()) {
      const auto cls = class_from_string(name);
      if (cls) row.per_class_pct[*cls] = pct.get<double>();
    }
    rows.push_back(row);
  }
  return rows;
}

int run_bench(const std::string& manifest_path, const BackendFlags& backend_flags,
              int concurrency, const std::string& out_dir, bool report,
              const std::string& ensemble_text, const std::string& logs_dir,
              const std::string& audit_ref, const std::string& hardware,
              bool lenient) {
  const auto dataset = bench::load_manifest(manifest_path);
  fs::create_directories(out_dir);

  classify::BackendDescriptor desc;
  apply_backend_flags(desc, backend_flags);

  bench::EvaluateOptions opts;
  opts.concurrency = concurrency;
  opts.hardware_tag = hardware;
  opts.parse.lenient_punctuation = lenient;
  opts.read_images = desc.kind == classify::BackendDescriptor::Kind::LiveHttp;

  const auto backend = classify::make_backend(desc);
  const auto eval = bench::evaluate(*backend, dataset, opts);

  const fs::path log_path =
      fs::path(out_dir) /
      ("responses_" + bench::sanitize_model_name(eval.log.model) + ".jsonl");
  bench::save_response_log(eval.log, log_path);
  std::cout << "wrote " << log_path.string() << " (" << eval.log.records.size()
            << " records)\n";

  if (!eval.errors.empty()) {
    std::cerr << eval.errors.size() << " record(s) failed:\n";
    for (const auto& e : eval.errors) std::cerr << "  " << e << "\n";
  }

  std::vector<bench::ModelResults> results{results_for(eval.log, dataset)};

  if (!ensemble_text.empty()) {
    auto spec = bench::EnsembleSpec::parse(ensemble_text);
    const fs::path members_dir = logs_dir.empty() ? fs::path(out_dir) : fs::path(logs_dir);
    std::vector<bench::ResponseLog> member_logs;
    for (const auto& [name, weight] : spec.members) {
      if (name == eval.log.model) {
        member_logs.push_back(eval.log);
        continue;
      }
      const fs::path member_path =
          members_dir / ("responses_" + bench::sanitize_model_name(name) + ".jsonl");
      bench::ResponseLog member = bench::load_response_log(member_path);
      member.model = name;  // file may predate the model field
      member_logs.push_back(std::move(member));
    }
    const auto voted = bench::ensemble_vote(member_logs, spec, dataset);
    const fs::path voted_path =
        fs::path(out_dir) /
        ("responses_" + bench::sanitize_model_name(voted.model) + ".jsonl");
    bench::save_response_log(voted, voted_path);
    std::cout << "wrote " << voted_path.string() << "\n";
    results.push_back(results_for(voted, dataset));
  }

  std::vector<bench::AuditFinding> audit;
  if (!audit_ref.empty()) {
    std::ifstream f(audit_ref);
    if (!f) throw std::runtime_error("cannot open audit reference: " + audit_ref);
    std::map<GarmentClass, int> class_counts;
    int stated_total = 0;
    const auto rows =
        load_reference_rows(nlohmann::json::parse(f), class_counts, stated_total);
    audit = bench::consistency_audit(rows, class_counts, stated_total);
    for (const auto& finding : audit) {
      if (finding.flagged)
        std::cout << "audit: " << finding.model << " inconsistent ("
                  << finding.sum_of_class_corrects << " vs "
                  << finding.overall_corrects << " corrects)\n";
    }
  }

  if (report || !audit.empty()) {
    bench::emit_report(results, audit, bench::ReportFormat::All, out_dir);
    if (report) std::cout << "report: " << (fs::path(out_dir) / "report.md").string() << "\n";
  }

  const bool live = desc.kind == classify::BackendDescriptor::Kind::LiveHttp;
  if (live && eval.transport_failures > 0) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Textile sorting cell simulator and classifier benchmark"};
  app.require_subcommand(1);

  // --- cell ---
  auto* cell = app.add_subcommand("cell", "Simulated sorting cell");
  auto* cell_run = cell->add_subcommand("run", "Run the inspection loop until the basket is empty");
  std::string config_path, scene_path, out_dir;
  std::optional<uint64_t> seed;
  BackendFlags cell_backend;
  std::optional<double> pick_failure_rate, spread_factor, depth_mm_opt, service_timeout;
  std::optional<int> rgb_delta_opt, candidate_budget, pick_budget, baseline_frames;
  bool lenient = false;
  cell_run->add_option("--config", config_path, "JSON config file; flags override it");
  cell_run->add_option("--scene", scene_path, "Scene spec JSON (counts, foreign, entanglement)");
  cell_run->add_option("--seed", seed, "Master seed for all randomness");
  cell_run->add_option("--out", out_dir, "Output directory (default: out)");
  add_backend_flags(cell_run, cell_backend);
  cell_run->add_option("--pick-failure-rate", pick_failure_rate, "Basket pick failure probability");
  cell_run->add_option("--spread-factor", spread_factor, "Footprint growth when spreading on the table");
  cell_run->add_option("--candidate-budget", candidate_budget, "Total candidate attempts per episode");
  cell_run->add_option("--pick-budget", pick_budget, "Consecutive grasp failures tolerated");
  cell_run->add_option("--baseline-frames", baseline_frames, "Frames captured for the segmentation baseline");
  cell_run->add_option("--depth-mm", depth_mm_opt, "Segmentation depth threshold (strict >, mm)");
  cell_run->add_option("--rgb", rgb_delta_opt, "Segmentation color threshold (strict >, per channel)");
  cell_run->add_option("--service-timeout-s", service_timeout, "Service call timeout (logical seconds)");
  cell_run->add_flag("--lenient-punctuation", lenient, "Strip trailing punctuation before matching labels");

  // --- segment ---
  auto* segment = app.add_subcommand("segment", "Segment frames against a stored baseline");
  std::string baseline_dir, seg_out = "out";
  std::vector<std::string> frames;
  double seg_depth = 5.0;
  int seg_rgb = 15;
  segment->add_option("--baseline-dir", baseline_dir, "Directory with baseline_rgb.png/baseline_depth.pgm/baseline.json")->required();
  segment->add_option("frames", frames, "Frame PNG paths (each with a matching .pgm)")->required();
  segment->add_option("--depth-mm", seg_depth, "Depth threshold (strict >, mm)");
  segment->add_option("--rgb", seg_rgb, "Color threshold (strict >, per channel)");
  segment->add_option("--out", seg_out, "Output directory for PLY files");

  // --- bench ---
  auto* bench_cmd = app.add_subcommand("bench", "Evaluate a classifier backend over a manifest");
  std::string manifest, bench_out = "out", ensemble_text, logs_dir, audit_ref, hardware;
  int concurrency = 1;
  bool report = false, bench_lenient = false;
  BackendFlags bench_backend;
  bench_cmd->add_option("--manifest", manifest, "JSON-lines dataset manifest")->required();
  add_backend_flags(bench_cmd, bench_backend);
  bench_cmd->add_option("--concurrency", concurrency, "Evaluation worker threads");
  bench_cmd->add_option("--out", bench_out, "Output directory");
  bench_cmd->add_flag("--report", report, "Emit report.md, CSV tables, JSON and heatmaps");
  bench_cmd->add_option("--ensemble", ensemble_text, "Weighted vote, e.g. \"m1=0.6,m2=0.4\"");
  bench_cmd->add_option("--logs-dir", logs_dir, "Where ensemble member logs live (default: --out)");
  bench_cmd->add_option("--audit-ref", audit_ref, "Reference accuracy table JSON to audit");
  bench_cmd->add_option("--hardware", hardware, "Free-form hardware tag recorded in the log");
  bench_cmd->add_flag("--lenient-punctuation", bench_lenient, "Strip trailing punctuation before matching labels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cell_run->parsed()) {
      cli::CliConfig config;
      if (!config_path.empty()) config = cli::load_config_file(config_path);
      if (!scene_path.empty()) config.run.scene = cli::load_scene_file(scene_path);
      if (seed) config.seed = *seed;
      if (!out_dir.empty()) config.out_dir = out_dir;
      apply_backend_flags(config.run.backend, cell_backend);
      if (pick_failure_rate) config.run.pick_failure_rate = *pick_failure_rate;
      if (spread_factor) config.run.spread_factor = *spread_factor;
      if (candidate_budget) config.run.budgets.candidate_attempts = *candidate_budget;
      if (pick_budget) config.run.budgets.pick_retries = *pick_budget;
      if (baseline_frames) config.run.baseline_frames = *baseline_frames;
      if (depth_mm_opt) config.run.seg_thresholds.depth_delta_mm = *depth_mm_opt;
      if (rgb_delta_opt) config.run.seg_thresholds.rgb_delta = *rgb_delta_opt;
      if (service_timeout) config.run.service_timeout_s = *service_timeout;
      if (lenient) config.run.parse.lenient_punctuation = true;
      return run_cell(config);
    }
    if (segment->parsed())
      return run_segment(baseline_dir, frames, seg_depth, seg_rgb, seg_out);
    if (bench_cmd->parsed())
      return run_bench(manifest, bench_backend, concurrency, bench_out, report,
                       ensemble_text, logs_dir, audit_ref, hardware, bench_lenient);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
