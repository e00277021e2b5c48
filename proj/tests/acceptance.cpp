// Acceptance suite: one criterion per section, one PASS/FAIL line each.
// Exits nonzero if any criterion fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sortcell/bench.hpp"
#include "sortcell/config.hpp"
#include "sortcell/errors.hpp"
#include "sortcell/render.hpp"
#include "sortcell/rng.hpp"
#include "sortcell/runner.hpp"
#include "sortcell/segmentation.hpp"

using namespace sortcell;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::vector<std::string> g_issues;

#define EXPECT(cond, what)                                            \
  do {                                                                \
    if (!(cond)) {                                                    \
      g_issues.push_back(std::string(what) + " (" #cond ")");         \
    }                                                                 \
  } while (0)

void criterion(int number, const std::string& title, double budget_s,
               const std::function<void()>& body) {
  g_issues.clear();
  const auto start = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const std::exception& e) {
    g_issues.push_back(std::string("exception: ") + e.what());
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0 && elapsed > budget_s) {
    std::ostringstream msg;
    msg << "runtime " << elapsed << " s exceeds budget " << budget_s << " s";
    g_issues.push_back(msg.str());
  }
  if (g_issues.empty()) {
    std::printf("[PASS] criterion %d: %s (%.2f s)\n", number, title.c_str(), elapsed);
  } else {
    ++g_failures;
    std::printf("[FAIL] criterion %d: %s (%.2f s)\n", number, title.c_str(), elapsed);
    for (const std::string& issue : g_issues)
      std::printf("       - %s\n", issue.c_str());
  }
}

cellsim::CellLayout small_layout() {
  cellsim::CellLayout l = cellsim::CellLayout::standard();
  l.cameras[CameraId::Cam1] =
      CameraModel::top_down(CameraId::Cam1, 300, 250, 800, 145, 145, 160, 120);
  l.cameras[CameraId::Cam2] =
      CameraModel::top_down(CameraId::Cam2, 1000, 250, 800, 145, 145, 160, 120);
  return l;
}

orchestrator::RunConfig mock_config(cellsim::SceneSpec scene, bool small = true) {
  orchestrator::RunConfig config;
  config.scene = std::move(scene);
  if (small) config.layout = small_layout();
  config.backend.kind = classify::BackendDescriptor::Kind::MockProfile;
  config.backend.mock_seed = 7;
  return config;
}

// ---------------------------------------------------------------- criterion 1

void retry_semantics() {
  cellsim::SceneSpec empty;
  const auto config = mock_config(empty);
  const auto result = orchestrator::run_until_empty(config, 1);
  EXPECT(result.zone_a_candidate_requests == 5,
         "empty basket must consume exactly 5 candidate requests");
  EXPECT(result.clean_shutdown, "empty basket run must shut down cleanly");
  EXPECT(result.cycles.empty(), "empty basket run must report zero cycles");

  for (int k = 1; k <= 5; ++k) {
    int calls = 0;
    const auto got = grasp::request_candidate_with_retry(
        [&]() -> std::optional<grasp::GraspCandidate> {
          ++calls;
          if (calls == k)
            return grasp::GraspCandidate{10, 10, 780.0, {0, 0, 20}, 0.0, 0.5};
          return std::nullopt;
        },
        5);
    EXPECT(got.has_value(), "success on attempt k within budget must return it");
    EXPECT(calls == k, "success on attempt k must make exactly k calls");
  }
  int calls = 0;
  const auto none = grasp::request_candidate_with_retry(
      [&]() -> std::optional<grasp::GraspCandidate> {
        ++calls;
        return std::nullopt;
      },
      5);
  EXPECT(!none.has_value(), "an always-empty source must return none");
  EXPECT(calls == 5, "an always-empty source must be asked exactly 5 times");
}

// ---------------------------------------------------------------- criterion 2

void segmentation_oracle() {
  const CameraModel cam =
      CameraModel::top_down(CameraId::Cam2, 1000, 250, 800, 580, 580, 640, 480);
  RgbdFrame base_frame =
      RgbdFrame::blank(CameraId::Cam2, 640, 480, {128, 128, 128}, 800.0f);
  const auto baseline = segmentation::capture_baseline({base_frame});
  const segmentation::SegThresholds thr;

  RngStream rng(31337);
  for (int pair = 0; pair < 100; ++pair) {
    RgbdFrame f = base_frame;
    for (int v = 0; v < f.height; ++v) {
      for (int u = 0; u < f.width; ++u) {
        const double roll = rng.uniform01();
        if (roll < 0.12) {
          static const float deltas[] = {-25.f, -5.5f, -5.f, -4.5f,
                                         4.5f,  5.f,   5.5f, 25.f};
          f.set_depth(u, v, f.depth_at(u, v) + deltas[rng.uniform_int(0, 7)]);
        } else if (roll < 0.24) {
          static const int deltas[] = {-40, -16, -15, -14, 14, 15, 16, 40};
          const int d = deltas[rng.uniform_int(0, 7)];
          Rgb8 c = f.color_at(u, v);
          const int ch = rng.uniform_int(0, 2);
          auto bump = [&](uint8_t x) {
            return static_cast<uint8_t>(std::clamp(int(x) + d, 0, 255));
          };
          if (ch == 0) c.r = bump(c.r);
          else if (ch == 1) c.g = bump(c.g);
          else c.b = bump(c.b);
          f.set_color(u, v, c);
        }
      }
    }

    const auto got = segmentation::segment(f, baseline, thr, cam);

    // Independent double-loop oracle with the thresholds applied literally.
    size_t cursor = 0;
    bool mismatch = false;
    size_t want_count = 0;
    for (int v = 0; v < f.height && !mismatch; ++v) {
      for (int u = 0; u < f.width && !mismatch; ++u) {
        const size_t p = static_cast<size_t>(v) * f.width + u;
        const double dd =
            std::abs(double(f.depth_mm[p]) - double(baseline.depth_mm[p]));
        bool fg = dd > thr.depth_delta_mm;
        for (size_t ch = 0; ch < 3 && !fg; ++ch)
          if (std::abs(int(f.rgb[p * 3 + ch]) - int(baseline.rgb[p * 3 + ch])) >
              thr.rgb_delta)
            fg = true;
        if (!fg) continue;
        ++want_count;
        if (cursor >= got.points.size()) {
          mismatch = true;
          break;
        }
        const double z = f.depth_mm[p];
        const Vec3 cam_pt{(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z};
        const Vec3 world = cam.camera_to_world(cam_pt);
        const auto& pt = got.points[cursor++];
        if (pt.x != float(world.x) || pt.y != float(world.y) ||
            pt.z != float(world.z) || pt.r != f.rgb[p * 3] ||
            pt.g != f.rgb[p * 3 + 1] || pt.b != f.rgb[p * 3 + 2])
          mismatch = true;
      }
    }
    EXPECT(!mismatch && cursor == got.points.size() &&
               want_count == got.points.size(),
           "segment() must equal the brute-force oracle exactly");
    if (mismatch) return;
  }
}

// ---------------------------------------------------------------- criterion 3

void parser_conformance() {
  using classify::ParsedLabel;
  using classify::parse_text;

  RngStream rng(555);
  const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ .,!?\t\n-_09";
  int checked = 0;
  for (int i = 0; i < 1200; ++i) {
    std::string s;
    const int len = rng.uniform_int(0, 30);
    for (int k = 0; k < len; ++k)
      s += alphabet[size_t(rng.uniform_int(0, int(alphabet.size()) - 1))];
    ++checked;

    const ParsedLabel a = parse_text(s);  // totality: must not throw
    std::string lower = s;
    for (char& c : lower) c = char(std::tolower((unsigned char)c));
    EXPECT(parse_text(lower) == a, "case-insensitivity must hold");

    // multi-word rejection: any internal whitespace after trim is invalid
    size_t b = s.find_first_not_of(" \t\n\r\f\v");
    size_t e = s.find_last_not_of(" \t\n\r\f\v");
    if (b != std::string::npos) {
      const std::string core = s.substr(b, e - b + 1);
      const bool has_ws = core.find_first_of(" \t\n\r\f\v") != std::string::npos;
      if (has_ws)
        EXPECT(a.kind == ParsedLabel::Kind::MultiWord,
               "internal whitespace must parse as multi_word");
    }
    if (g_issues.size() > 3) return;
  }
  EXPECT(checked >= 1000, "property suite must cover at least 1000 strings");

  for (const GarmentClass c : kClassOrder) {
    std::string word(to_string(c));
    EXPECT(parse_text(word) == ParsedLabel::make_valid(c),
           "canonical lowercase word must parse Valid");
    std::string upper = word;
    for (char& ch : upper) ch = char(std::toupper((unsigned char)ch));
    EXPECT(parse_text(upper) == ParsedLabel::make_valid(c),
           "canonical uppercase word must parse Valid");
    std::string mixed = word;
    mixed[0] = char(std::toupper((unsigned char)mixed[0]));
    EXPECT(parse_text(mixed) == ParsedLabel::make_valid(c),
           "canonical mixed-case word must parse Valid");
  }

  EXPECT(parse_text("The image shows a piece of green fabric").kind ==
             ParsedLabel::Kind::MultiWord,
         "sentence responses must parse Invalid(multi_word)");
}

// ---------------------------------------------------------------- criterion 4

void metrics_reproduction() {
  // Reference row reconstruction by marginal counts.
  const std::map<GarmentClass, int> counts{
      {GarmentClass::Shirt, 38},    {GarmentClass::Sock, 64},
      {GarmentClass::Trousers, 43}, {GarmentClass::Underwear, 12},
      {GarmentClass::Other, 65},    {GarmentClass::Empty, 4}};
  const std::map<GarmentClass, double> reference_pct{
      {GarmentClass::Shirt, 97.37},    {GarmentClass::Sock, 100.00},
      {GarmentClass::Trousers, 60.47}, {GarmentClass::Underwear, 83.33},
      {GarmentClass::Other, 93.85},    {GarmentClass::Empty, 25.00}};

  std::vector<bench::DatasetRecord> dataset;
  bench::ResponseLog log;
  log.model = "qwen3-vl:235b";
  int serial = 0;
  for (const GarmentClass cls : kClassOrder) {
    const int n = counts.at(cls);
    const int correct = int(std::lround(reference_pct.at(cls) / 100.0 * n));
    for (int i = 0; i < n; ++i) {
      const std::string id = "r" + std::to_string(serial++);
      dataset.push_back({id, "none.png", cls});
      bench::ResponseRecord rec;
      rec.id = id;
      rec.model = log.model;
      rec.latency_s = 1.0;
      if (i < correct) {
        rec.parsed = classify::ParsedLabel::make_valid(cls);
        rec.raw = std::string(to_string(cls));
      } else {
        rec.parsed =
            classify::ParsedLabel::invalid(classify::ParsedLabel::Kind::MultiWord);
        rec.raw = "not a single word";
      }
      log.records.push_back(rec);
    }
  }

  const auto matrix = bench::confusion_matrix(log, dataset);
  const auto acc = bench::per_class_accuracy(matrix);
  for (const GarmentClass cls : kClassOrder) {
    const double got_pct = *acc.at(cls) * 100.0;
    EXPECT(std::abs(got_pct - reference_pct.at(cls)) <= 0.01,
           "per-class accuracy must match the reference row within 0.01 pp");
  }

  // The audit must flag the two internally inconsistent reference rows.
  std::ifstream ref(fs::path(SORTCELL_SOURCE_DIR) / "data" /
                    "benchmark_reference.json");
  EXPECT(ref.good(), "reference table must ship with the repo");
  const auto j = nlohmann::json::parse(ref);
  std::map<GarmentClass, int> ref_counts;
  for (const auto& [name, n] : j.at("class_counts").items())
    ref_counts[*class_from_string(name)] = n.get<int>();
  std::vector<bench::ReferenceRow> rows;
  for (const auto& m : j.at("models")) {
    bench::ReferenceRow row;
    row.model = m.at("name").get<std::string>();
    row.overall_pct = m.at("overall_pct").get<double>();
    for (const auto& [name, pct] : m.at("per_class_pct").items())
      row.per_class_pct[*class_from_string(name)] = pct.get<double>();
    rows.push_back(row);
  }
  const auto findings =
      bench::consistency_audit(rows, ref_counts, j.at("total").get<int>());
  bool gemma = false, qwen = false;
  for (const auto& f : findings) {
    if (f.model == "gemma3:12b") gemma = f.flagged;
    if (f.model == "qwen3-vl:235b") qwen = f.flagged;
  }
  EXPECT(gemma, "audit must flag the gemma3:12b row as inconsistent");
  EXPECT(qwen, "audit must flag the qwen3-vl:235b row as inconsistent");
}

// ---------------------------------------------------------------- criterion 5

void timing_stats_reproduction() {
  // Frozen sample shaped to the reference row: mean 0.653, P10 0.620,
  // P90 0.689 under rank = q*(n-1) interpolation.
  const std::vector<double> sample{0.600, 0.620, 0.640, 0.645, 0.650, 0.655,
                                   0.659, 0.660, 0.665, 0.689, 0.700};
  const auto stats = bench::timing_stats(sample);
  EXPECT(std::abs(stats.mean_s - 0.653) < 1e-3, "mean must be 0.653 within 1e-3");
  EXPECT(std::abs(stats.p10_s - 0.620) < 1e-3, "P10 must be 0.620 within 1e-3");
  EXPECT(std::abs(stats.p90_s - 0.689) < 1e-3, "P90 must be 0.689 within 1e-3");

  RngStream rng(606);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v;
    const int n = 1 + rng.uniform_int(0, 99);
    for (int i = 0; i < n; ++i) v.push_back(rng.uniform_range(0.0, 30.0));
    const double q = rng.uniform01();
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double rank = q * (n - 1);
    const size_t lo = size_t(std::floor(rank));
    const size_t hi = size_t(std::ceil(rank));
    const double frac = rank - double(lo);
    const double want = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    if (bench::percentile(v, q) != want) {
      EXPECT(false, "percentile must match the independent oracle exactly");
      return;
    }
  }
}

// ---------------------------------------------------------------- criterion 6

void mock_calibration() {
  classify::ConfusionProfile profile;
  for (const GarmentClass cls : kClassOrder) {
    std::array<double, kClassCount + 1> row{};
    for (size_t col = 0; col <= classify::ConfusionProfile::kInvalidCol; ++col)
      row[col] = 0.2 / kClassCount;
    row[class_index(cls)] = 0.8;
    profile.set_row(cls, row);
  }

  std::vector<bench::DatasetRecord> dataset;
  for (int i = 0; i < 10000; ++i)
    dataset.push_back({"d" + std::to_string(i), "none.png", GarmentClass::Sock});

  classify::MockProfileBackend serial_backend(profile, 2025);
  classify::MockProfileBackend parallel_backend(profile, 2025);
  bench::EvaluateOptions serial_opts, parallel_opts;
  serial_opts.concurrency = 1;
  parallel_opts.concurrency = 8;
  const auto serial = bench::evaluate(serial_backend, dataset, serial_opts);
  const auto parallel = bench::evaluate(parallel_backend, dataset, parallel_opts);

  EXPECT(bench::response_log_to_jsonl(serial.log) ==
             bench::response_log_to_jsonl(parallel.log),
         "concurrency 1 and 8 must produce identical logs");

  std::array<double, kClassCount + 1> freq{};
  for (const auto& rec : serial.log.records) {
    freq[rec.parsed.valid() ? class_index(*rec.parsed.label)
                            : classify::ConfusionProfile::kInvalidCol] += 1;
  }
  double l1 = 0;
  const auto& row = profile.row(GarmentClass::Sock);
  for (size_t col = 0; col <= classify::ConfusionProfile::kInvalidCol; ++col)
    l1 += std::abs(freq[col] / 10000.0 - row[col]);
  EXPECT(l1 < 0.04, "empirical frequencies must be within L1 0.04 of the profile");
}

// ---------------------------------------------------------------- criterion 7

void end_to_end_determinism() {
  const cellsim::SceneSpec scene =
      cli::load_scene_file(fs::path(SORTCELL_SOURCE_DIR) / "scenes" / "mixed12.json");
  orchestrator::RunConfig config = mock_config(scene, /*small=*/false);

  const auto a = orchestrator::run_until_empty(config, 42);
  EXPECT(a.clean_shutdown, "the mixed scene must run to a clean shutdown");
  EXPECT(a.cycles.size() == 12, "all 12 items must be cycled");
  for (const auto& cycle : a.cycles)
    EXPECT(cycle.destination_bin == cycle.true_class,
           "identity mock must bin every item by its true class");
  EXPECT(a.final_world.items_in("C").size() == 12, "all items must end in bins");
  EXPECT(a.final_world.items_in("A").empty(), "basket must end empty");

  // The entangled pair: both partners cycled, in distinct cycles; the
  // bycatch partner was returned to the basket and picked later. Links are
  // broken during the shake, so recover the pair from the spawn state.
  std::string first, second;
  const auto spawn = cellsim::spawn_scene(scene, 42, config.layout);
  for (const auto& it : spawn.items)
    if (it.entangled_with) {
      first = it.id;
      second = *it.entangled_with;
    }
  EXPECT(!first.empty(), "scene must contain one entangled pair");
  int first_idx = -1, second_idx = -1;
  for (size_t i = 0; i < a.cycles.size(); ++i) {
    if (a.cycles[i].item_id == first) first_idx = int(i);
    if (a.cycles[i].item_id == second) second_idx = int(i);
  }
  EXPECT(first_idx >= 0 && second_idx >= 0 && first_idx != second_idx,
         "both entangled partners must get their own cycle");

  const auto b = orchestrator::run_until_empty(config, 42);
  EXPECT(orchestrator::run_log_to_jsonl(a.log) ==
             orchestrator::run_log_to_jsonl(b.log),
         "two runs with identical (config, seed) must produce byte-identical logs");
  orchestrator::validate_run_log(a.log, config.budgets);
}

// ---------------------------------------------------------------- criterion 8

void conservation_fuzz() {
  for (uint64_t seed = 1; seed <= 50; ++seed) {
    RngStream gen = RngStream(seed).split("scene-gen");
    cellsim::SceneSpec scene;
    scene.counts[GarmentClass::Shirt] = gen.uniform_int(0, 3);
    scene.counts[GarmentClass::Sock] = gen.uniform_int(0, 5);
    scene.counts[GarmentClass::Trousers] = gen.uniform_int(0, 3);
    scene.counts[GarmentClass::Underwear] = gen.uniform_int(0, 3);
    scene.counts[GarmentClass::Other] = gen.uniform_int(0, 3);
    scene.foreign_count = gen.uniform_int(0, 2);
    scene.entangle_p = 0.3;
    const int spawned = scene.total_items();

    orchestrator::RunConfig config = mock_config(scene);
    config.pick_failure_rate = 0.2;
    const auto result = orchestrator::run_until_empty(config, seed);

    const size_t in_basket = result.final_world.items_in("A").size();
    const size_t in_bins = result.final_world.items_in("C").size();
    if (in_basket + in_bins != size_t(spawned)) {
      std::ostringstream msg;
      msg << "seed " << seed << ": basket " << in_basket << " + bins " << in_bins
          << " != spawned " << spawned;
      EXPECT(false, msg.str());
      return;
    }
    try {
      orchestrator::validate_run_log(result.log, config.budgets);
    } catch (const std::exception& e) {
      EXPECT(false, std::string("seed ") + std::to_string(seed) +
                        " log replay failed: " + e.what());
      return;
    }
  }
}

// ---------------------------------------------------------------- criterion 9

void live_wire_conformance() {
  httplib::Server server;
  std::atomic<int> post_count{0};
  nlohmann::json seen;
  server.Post("/api/chat", [&](const httplib::Request& req, httplib::Response& res) {
    post_count += 1;
    seen = nlohmann::json::parse(req.body);
    res.set_content(R"({"message":{"role":"assistant","content":"sock"}})",
                    "application/json");
  });
  const int port = 18741;
  std::thread server_thread([&] { server.listen("127.0.0.1", port); });
  server.wait_until_ready();

  classify::LiveHttpBackend backend("http://127.0.0.1:" + std::to_string(port),
                                    "bench-model", 5.0);
  const auto request = classify::build_prompt();
  const auto resp = classify::classify_image(backend, {"r0", "IMAGEBYTES", ""},
                                             request);
  EXPECT(resp.text == "sock", "stub reply must round-trip");
  EXPECT(post_count == 1, "exactly one POST per classify_image call");
  EXPECT(seen.at("stream") == false, "stream must be disabled");
  EXPECT(seen.at("messages").size() == 2, "one system and one user message");
  EXPECT(seen["messages"][0]["role"] == "system", "first message is the system role");
  EXPECT(seen["messages"][1]["role"] == "user", "second message is the user role");
  EXPECT(seen["messages"][1]["images"].size() >= 1, "at least one image attached");
  EXPECT(seen["messages"][1]["images"][0] ==
             classify::base64_encode("IMAGEBYTES"),
         "image must be base64 of the payload bytes");
  server.stop();
  server_thread.join();

  // Delayed stub trips the timeout path.
  httplib::Server slow;
  slow.Post("/api/chat", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1200));
    res.set_content(R"({"message":{"content":"sock"}})", "application/json");
  });
  const int slow_port = 18742;
  std::thread slow_thread([&] { slow.listen("127.0.0.1", slow_port); });
  slow.wait_until_ready();
  classify::LiveHttpBackend impatient(
      "http://127.0.0.1:" + std::to_string(slow_port), "bench-model", 0.3);
  bool timed_out = false;
  try {
    impatient.classify({"r1", "IMAGEBYTES", ""}, request);
  } catch (const TimeoutError&) {
    timed_out = true;
  }
  EXPECT(timed_out, "a delayed stub must trigger the timeout error");
  slow.stop();
  slow_thread.join();
}

}  // namespace

int main() {
  criterion(1, "retry semantics: 5 requests then shutdown", 1.0, retry_semantics);
  criterion(2, "segmentation equals the brute-force oracle on 100 frame pairs",
            30.0, segmentation_oracle);
  criterion(3, "parser conformance over generated strings", 0, parser_conformance);
  criterion(4, "reference-table metrics reproduction and audit flags", 0,
            metrics_reproduction);
  criterion(5, "timing stats match the reference row and the percentile oracle",
            0, timing_stats_reproduction);
  criterion(6, "mock calibration: L1 < 0.04, concurrency-invariant", 0,
            mock_calibration);
  criterion(7, "end-to-end determinism and routing soundness", 10.0,
            end_to_end_determinism);
  criterion(8, "conservation and log validity over 50 fuzzed scenes", 0,
            conservation_fuzz);
  criterion(9, "live-wire conformance against a stub chat server", 5.0,
            live_wire_conformance);

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
