#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sortcell/backends.hpp"
#include "sortcell/classify.hpp"
#include "sortcell/garment.hpp"

namespace sortcell::bench {

struct DatasetRecord {
  std::string id;
  std::string image_path;
  GarmentClass ground_truth = GarmentClass::Other;  // `empty` labels empty scenes
};

struct ResponseRecord {
  std::string id;
  std::string model;
  std::string raw;
  classify::ParsedLabel parsed;
  double latency_s = 0;
};

struct ResponseLog {
  std::string model;
  std::string hardware;  // free-form tag, e.g. the GPU the model ran on
  std::vector<ResponseRecord> records;
};

// JSON-lines manifest {"id", "image", "label"}; rejects duplicate ids and
// non-canonical labels with the offending line number.
std::vector<DatasetRecord> load_manifest(const std::filesystem::path& path);

struct EvaluateOptions {
  int concurrency = 1;
  std::string hardware_tag;
  classify::ParseOptions parse;
  bool read_images = false;  // live backends need the bytes; mocks do not
};

struct EvaluateResult {
  ResponseLog log;
  int transport_failures = 0;
  std::vector<std::string> errors;  // per-record failure summaries
};

// One classify + parse per record; log order equals manifest order no matter
// how workers are scheduled. Transport failures become invalid(transport)
// records instead of aborting.
EvaluateResult evaluate(classify::ClassifierBackend& backend,
                        const std::vector<DatasetRecord>& dataset,
                        const EvaluateOptions& opts = {});

std::string response_log_to_jsonl(const ResponseLog& log);
ResponseLog response_log_from_jsonl(const std::string& text);
void save_response_log(const ResponseLog& log, const std::filesystem::path& path);
ResponseLog load_response_log(const std::filesystem::path& path);

// Ground-truth rows x predicted columns, plus one invalid column. Class
// order is fixed: shirt, sock, trousers, underwear, other, empty.
class ConfusionMatrix {
 public:
  static constexpr size_t kInvalidCol = kClassCount;

  int& at(GarmentClass truth, size_t col) { return counts_[class_index(truth)][col]; }
  int at(GarmentClass truth, size_t col) const {
    return counts_[class_index(truth)][col];
  }
  int diagonal(GarmentClass c) const { return at(c, class_index(c)); }
  int row_sum(GarmentClass truth) const;
  int total() const;
  int trace() const;

 private:
  std::array<std::array<int, kClassCount + 1>, kClassCount> counts_{};
};

// Requires the log to cover every dataset id exactly once.
ConfusionMatrix confusion_matrix(const ResponseLog& log,
                                 const std::vector<DatasetRecord>& dataset);

// Recall per true class; zero-count classes report no value rather than 0.
std::map<GarmentClass, std::optional<double>> per_class_accuracy(
    const ConfusionMatrix& m);

double overall_accuracy(const ConfusionMatrix& m);

// Published-table cross-check: per-model accuracies as percentages.
struct ReferenceRow {
  std::string model;
  double overall_pct = 0;
  std::map<GarmentClass, double> per_class_pct;
};

struct AuditFinding {
  std::string model;
  int sum_of_class_corrects = 0;  // sum of round(acc * class count)
  int overall_corrects = 0;       // round(overall * total)
  bool flagged = false;           // |difference| >= 1
};

// Back-computes per-class correct counts and compares their sum against the
// overall figure; rows that disagree by >= 1 are flagged.
std::vector<AuditFinding> consistency_audit(
    const std::vector<ReferenceRow>& rows,
    const std::map<GarmentClass, int>& class_counts, int stated_total);

struct TimingStats {
  double mean_s = 0;
  double p10_s = 0;
  double p90_s = 0;
  size_t n = 0;
};

// Percentile by linear interpolation on the sorted sample (inclusive:
// rank = q*(n-1)).
double percentile(std::vector<double> values, double q);
TimingStats timing_stats(const std::vector<double>& latencies);

struct EnsembleSpec {
  std::vector<std::pair<std::string, double>> members;  // model -> weight

  // Normalizes weights to sum 1; throws on empty spec or non-positive sum.
  void normalize();
  static EnsembleSpec parse(const std::string& text);  // "a=0.3,b=0.4"
  std::string display_name() const;
};

// Weighted hard voting over parsed labels. Invalid members contribute
// nothing; ties break by the fixed class order; all-invalid records stay
// Invalid(not_a_class).
ResponseLog ensemble_vote(const std::vector<ResponseLog>& logs,
                          EnsembleSpec spec,
                          const std::vector<DatasetRecord>& dataset);

}  // namespace sortcell::bench
