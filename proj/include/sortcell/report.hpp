#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sortcell/bench.hpp"

namespace sortcell::bench {

struct ModelResults {
  std::string model;
  std::string hardware;
  ConfusionMatrix matrix;
  TimingStats timing;
};

enum class ReportFormat : unsigned {
  Md = 1u << 0,
  Csv = 1u << 1,
  Json = 1u << 2,
  All = Md | Csv | Json,
};

constexpr ReportFormat operator|(ReportFormat a, ReportFormat b) {
  return static_cast<ReportFormat>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}
constexpr bool has_format(ReportFormat mask, ReportFormat f) {
  return (static_cast<unsigned>(mask) & static_cast<unsigned>(f)) != 0;
}

std::string sanitize_model_name(const std::string& model);

// Writes report.md (accuracy + timing tables), table1.csv / table2.csv,
// report.json (full precision), confusion_<model>.csv and .svg per model,
// and audit.json when audit findings are supplied.
void emit_report(const std::vector<ModelResults>& results,
                 const std::vector<AuditFinding>& audit, ReportFormat formats,
                 const std::filesystem::path& out_dir);

std::string confusion_to_csv(const ConfusionMatrix& m);
// Self-contained SVG heatmap: 6 true-class rows x 7 predicted columns
// (invalid included), value-labeled cells.
std::string confusion_to_svg(const ConfusionMatrix& m, const std::string& title);

std::string accuracy_table_markdown(const std::vector<ModelResults>& results);
std::string timing_table_markdown(const std::vector<ModelResults>& results);

}  // namespace sortcell::bench
