#include "sortcell/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sortcell/errors.hpp"

namespace sortcell::bench {

using nlohmann::json;

std::vector<DatasetRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path.string());
  std::vector<DatasetRecord> records;
  std::map<std::string, size_t> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("manifest parse error at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    DatasetRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.image_path = j.at("image").get<std::string>();
    const std::string label = j.at("label").get<std::string>();
    const auto cls = class_from_string(label);
    if (!cls)
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": unknown label '" + label + "'");
    rec.ground_truth = *cls;
    if (!seen.emplace(rec.id, line_no).second)
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": duplicate id '" + rec.id + "'");
    records.push_back(std::move(rec));
  }
  return records;
}

EvaluateResult evaluate(classify::ClassifierBackend& backend,
                        const std::vector<DatasetRecord>& dataset,
                        const EvaluateOptions& opts) {
  EvaluateResult result;
  result.log.model = backend.model_name();
  result.log.hardware = opts.hardware_tag;
  result.log.records.resize(dataset.size());
  std::vector<std::string> errors(dataset.size());

  const int workers = std::max(1, opts.concurrency);
  std::atomic<size_t> cursor{0};
  const classify::ChatRequest request = classify::build_prompt();

  const auto work = [&] {
    for (;;) {
      const size_t i = cursor.fetch_add(1);
      if (i >= dataset.size()) return;
      const DatasetRecord& rec = dataset[i];
      classify::ImagePayload payload;
      payload.request_id = rec.id;
      payload.declared_class = std::string(to_string(rec.ground_truth));
      if (opts.read_images) {
        std::ifstream img(rec.image_path, std::ios::binary);
        if (img)
          payload.png_bytes.assign(std::istreambuf_iterator<char>(img),
                                   std::istreambuf_iterator<char>());
      }
      ResponseRecord& out = result.log.records[i];
      out.id = rec.id;
      out.model = result.log.model;
      try {
        const classify::RawResponse resp = backend.classify(payload, request);
        out.raw = resp.text;
        out.latency_s = resp.latency_s;
        out.parsed = classify::parse_response(resp, opts.parse);
      } catch (const Error& e) {
        out.raw.clear();
        out.latency_s = 0;
        out.parsed = classify::ParsedLabel::invalid(
            classify::ParsedLabel::Kind::Transport);
        errors[i] = rec.id + ": " + e.what();
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  for (const std::string& e : errors) {
    if (!e.empty()) {
      result.errors.push_back(e);
      result.transport_failures += 1;
    }
  }
  return result;
}

std::string response_log_to_jsonl(const ResponseLog& log) {
  std::string out;
  for (const ResponseRecord& rec : log.records) {
    json j;
    j["id"] = rec.id;
    j["model"] = rec.model;
    j["raw"] = rec.raw;
    j["parsed"] = rec.parsed.to_string();
    j["latency_s"] = rec.latency_s;
    if (!log.hardware.empty()) j["hardware"] = log.hardware;
    out += j.dump();
    out += '\n';
  }
  return out;
}

ResponseLog response_log_from_jsonl(const std::string& text) {
  ResponseLog log;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("response log parse error at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    ResponseRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.model = j.at("model").get<std::string>();
    rec.raw = j.at("raw").get<std::string>();
    const auto parsed =
        classify::ParsedLabel::from_string(j.at("parsed").get<std::string>());
    if (!parsed)
      throw std::runtime_error("response log line " + std::to_string(line_no) +
                               ": bad parsed label");
    rec.parsed = *parsed;
    rec.latency_s = j.at("latency_s").get<double>();
    if (log.model.empty()) log.model = rec.model;
    if (log.hardware.empty() && j.contains("hardware"))
      log.hardware = j.at("hardware").get<std::string>();
    log.records.push_back(std::move(rec));
  }
  return log;
}

void save_response_log(const ResponseLog& log, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  f << response_log_to_jsonl(log);
}

ResponseLog load_response_log(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open response log: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return response_log_from_jsonl(text);
}

int ConfusionMatrix::row_sum(GarmentClass truth) const {
  int sum = 0;
  for (const int v : counts_[class_index(truth)]) sum += v;
  return sum;
}

int ConfusionMatrix::total() const {
  int sum = 0;
  for (const GarmentClass c : kClassOrder) sum += row_sum(c);
  return sum;
}

int ConfusionMatrix::trace() const {
  int sum = 0;
  for (const GarmentClass c : kClassOrder) sum += diagonal(c);
  return sum;
}

ConfusionMatrix confusion_matrix(const ResponseLog& log,
                                 const std::vector<DatasetRecord>& dataset) {
  std::map<std::string, GarmentClass> truth;
  for (const DatasetRecord& rec : dataset) truth[rec.id] = rec.ground_truth;

  std::map<std::string, int> covered;
  ConfusionMatrix m;
  for (const ResponseRecord& rec : log.records) {
    const auto it = truth.find(rec.id);
    if (it == truth.end())
      throw std::invalid_argument("response log id not in dataset: " + rec.id);
    if (++covered[rec.id] > 1)
      throw std::invalid_argument("response log covers id twice: " + rec.id);
    const size_t col = rec.parsed.valid() ? class_index(*rec.parsed.label)
                                          : ConfusionMatrix::kInvalidCol;
    m.at(it->second, col) += 1;
  }
  if (covered.size() != truth.size())
    throw std::invalid_argument("response log does not cover the dataset");
  return m;
}

std::map<GarmentClass, std::optional<double>> per_class_accuracy(
    const ConfusionMatrix& m) {
  std::map<GarmentClass, std::optional<double>> acc;
  for (const GarmentClass c : kClassOrder) {
    const int row = m.row_sum(c);
    if (row == 0) {
      acc[c] = std::nullopt;
    } else {
      acc[c] = static_cast<double>(m.diagonal(c)) / static_cast<double>(row);
    }
  }
  return acc;
}

double overall_accuracy(const ConfusionMatrix& m) {
  const int total = m.total();
  if (total == 0) throw std::invalid_argument("empty confusion matrix");
  return static_cast<double>(m.trace()) / static_cast<double>(total);
}

std::vector<AuditFinding> consistency_audit(
    const std::vector<ReferenceRow>& rows,
    const std::map<GarmentClass, int>& class_counts, int stated_total) {
  std::vector<AuditFinding> findings;
  for (const ReferenceRow& row : rows) {
    AuditFinding f;
    f.model = row.model;
    for (const auto& [cls, pct] : row.per_class_pct) {
      const auto count = class_counts.find(cls);
      if (count == class_counts.end()) continue;
      f.sum_of_class_corrects +=
          static_cast<int>(std::lround(pct / 100.0 * count->second));
    }
    f.overall_corrects =
        static_cast<int>(std::lround(row.overall_pct / 100.0 * stated_total));
    f.flagged = std::abs(f.sum_of_class_corrects - f.overall_corrects) >= 1;
    findings.push_back(f);
  }
  return findings;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double rank = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(rank));
  const size_t hi = static_cast<size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

TimingStats timing_stats(const std::vector<double>& latencies) {
  if (latencies.empty()) throw std::invalid_argument("timing_stats of empty sample");
  TimingStats stats;
  stats.n = latencies.size();
  double sum = 0;
  for (const double v : latencies) sum += v;
  stats.mean_s = sum / static_cast<double>(latencies.size());
  stats.p10_s = percentile(latencies, 0.10);
  stats.p90_s = percentile(latencies, 0.90);
  return stats;
}

void EnsembleSpec::normalize() {
  if (members.empty()) throw std::invalid_argument("ensemble spec has no members");
  double sum = 0;
  for (const auto& [name, w] : members) {
    if (w < 0) throw std::invalid_argument("ensemble weight must be >= 0");
    sum += w;
  }
  if (sum <= 0) throw std::invalid_argument("ensemble weights sum to zero");
  for (auto& [name, w] : members) w /= sum;
}

EnsembleSpec EnsembleSpec::parse(const std::string& text) {
  EnsembleSpec spec;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.empty()) continue;
    const size_t eq = part.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("bad ensemble member '" + part +
                                  "', expected name=weight");
    const std::string name = part.substr(0, eq);
    double w = 0;
    try {
      size_t used = 0;
      w = std::stod(part.substr(eq + 1), &used);
      if (used != part.size() - eq - 1) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad ensemble weight in '" + part + "'");
    }
    spec.members.emplace_back(name, w);
  }
  if (spec.members.empty())
    throw std::invalid_argument("empty ensemble spec");
  return spec;
}

std::string EnsembleSpec::display_name() const {
  std::string out = "ensemble(";
  for (size_t i = 0; i < members.size(); ++i) {
    if (i) out += ",";
    out += members[i].first;
  }
  out += ")";
  return out;
}

ResponseLog ensemble_vote(const std::vector<ResponseLog>& logs, EnsembleSpec spec,
                          const std::vector<DatasetRecord>& dataset) {
  spec.normalize();

  std::vector<const ResponseLog*> members;
  for (const auto& [name, weight] : spec.members) {
    const auto it = std::find_if(logs.begin(), logs.end(),
                                 [&](const ResponseLog& l) { return l.model == name; });
    if (it == logs.end())
      throw std::invalid_argument("missing member log for model '" + name + "'");
    members.push_back(&*it);
  }

  // id -> record per member for coverage checks and lookup
  std::vector<std::map<std::string, const ResponseRecord*>> by_id(members.size());
  for (size_t k = 0; k < members.size(); ++k) {
    for (const ResponseRecord& rec : members[k]->records)
      by_id[k][rec.id] = &rec;
  }

  ResponseLog out;
  out.model = spec.display_name();
  for (const DatasetRecord& rec : dataset) {
    std::array<double, kClassCount> weight_for{};
    double max_latency = 0;
    for (size_t k = 0; k < members.size(); ++k) {
      const auto found = by_id[k].find(rec.id);
      if (found == by_id[k].end())
        throw std::invalid_argument("member log '" + spec.members[k].first +
                                    "' does not cover id '" + rec.id + "'");
      const ResponseRecord& member_rec = *found->second;
      max_latency = std::max(max_latency, member_rec.latency_s);
      if (member_rec.parsed.valid())
        weight_for[class_index(*member_rec.parsed.label)] += spec.members[k].second;
    }

    ResponseRecord voted;
    voted.id = rec.id;
    voted.model = out.model;
    voted.latency_s = max_latency;  // members queried in parallel

    double best = 0;
    std::optional<GarmentClass> winner;
    for (const GarmentClass c : kClassOrder) {  // fixed order breaks ties
      if (weight_for[class_index(c)] > best) {
        best = weight_for[class_index(c)];
        winner = c;
      }
    }
    if (winner) {
      voted.parsed = classify::ParsedLabel::make_valid(*winner);
      voted.raw = std::string(to_string(*winner));
    } else {
      voted.parsed =
          classify::ParsedLabel::invalid(classify::ParsedLabel::Kind::NotAClass);
      voted.raw = "";
    }
    out.records.push_back(std::move(voted));
  }
  return out;
}

}  // namespace sortcell::bench
