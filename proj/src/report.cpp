#include "sortcell/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sortcell::bench {

using nlohmann::json;

std::string sanitize_model_name(const std::string& model) {
  std::string out = model;
  for (char& c : out) {
    if (c == ':' || c == '/' || c == ' ' || c == '(' || c == ')' || c == ',')
      c = '_';
  }
  return out;
}

namespace {

std::string pct(std::optional<double> value) {
  if (!value) return "n/a";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f%%", *value * 100.0);
  return buf;
}

std::string fixed3(double v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string accuracy_table_markdown(const std::vector<ModelResults>& results) {
  std::ostringstream out;
  out << "| Model | Overall |";
  for (const GarmentClass c : kClassOrder) out << " " << to_string(c) << " |";
  out << "\n|---|---|";
  for (size_t i = 0; i < kClassCount; ++i) out << "---|";
  out << "\n";
  for (const ModelResults& r : results) {
    const auto acc = per_class_accuracy(r.matrix);
    out << "| " << r.model << " | " << pct(overall_accuracy(r.matrix)) << " |";
    for (const GarmentClass c : kClassOrder) out << " " << pct(acc.at(c)) << " |";
    out << "\n";
  }
  return out.str();
}

std::string timing_table_markdown(const std::vector<ModelResults>& results) {
  std::ostringstream out;
  out << "| Model | Hardware | mean (s) | P10 (s) | P90 (s) | n |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const ModelResults& r : results) {
    out << "| " << r.model << " | " << (r.hardware.empty() ? "-" : r.hardware)
        << " | " << fixed3(r.timing.mean_s) << " | " << fixed3(r.timing.p10_s)
        << " | " << fixed3(r.timing.p90_s) << " | " << r.timing.n << " |\n";
  }
  return out.str();
}

std::string confusion_to_csv(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "true\\pred";
  for (const GarmentClass c : kClassOrder) out << "," << to_string(c);
  out << ",invalid\n";
  for (const GarmentClass truth : kClassOrder) {
    out << to_string(truth);
    for (size_t col = 0; col <= ConfusionMatrix::kInvalidCol; ++col)
      out << "," << m.at(truth, col);
    out << "\n";
  }
  return out.str();
}

std::string confusion_to_svg(const ConfusionMatrix& m, const std::string& title) {
  constexpr int kCell = 56, kLeft = 96, kTop = 64;
  const int cols = static_cast<int>(ConfusionMatrix::kInvalidCol) + 1;
  const int rows = static_cast<int>(kClassCount);
  const int width = kLeft + cols * kCell + 16;
  const int height = kTop + rows * kCell + 16;

  int max_count = 1;
  for (const GarmentClass truth : kClassOrder)
    for (size_t col = 0; col <= ConfusionMatrix::kInvalidCol; ++col)
      max_count = std::max(max_count, m.at(truth, col));

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
      << "\">\n";
  out << "  <text x=\"" << kLeft << "\" y=\"20\" font-family=\"sans-serif\" "
         "font-size=\"14\">"
      << title << "</text>\n";

  const auto col_name = [](size_t col) {
    return col == ConfusionMatrix::kInvalidCol
               ? std::string("invalid")
               : std::string(to_string(kClassOrder[col]));
  };
  for (int col = 0; col < cols; ++col) {
    out << "  <text x=\"" << kLeft + col * kCell + kCell / 2 << "\" y=\""
        << kTop - 10 << "\" font-family=\"sans-serif\" font-size=\"10\" "
           "text-anchor=\"middle\">"
        << col_name(static_cast<size_t>(col)) << "</text>\n";
  }
  for (int row = 0; row < rows; ++row) {
    out << "  <text x=\"" << kLeft - 6 << "\" y=\""
        << kTop + row * kCell + kCell / 2 + 4
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">"
        << to_string(kClassOrder[static_cast<size_t>(row)]) << "</text>\n";
  }

  for (int row = 0; row < rows; ++row) {
    for (int col = 0; col < cols; ++col) {
      const int count =
          m.at(kClassOrder[static_cast<size_t>(row)], static_cast<size_t>(col));
      const double frac = static_cast<double>(count) / max_count;
      const int blue = 255 - static_cast<int>(std::lround(frac * 190));
      const int other = 255 - static_cast<int>(std::lround(frac * 235));
      const int x = kLeft + col * kCell, y = kTop + row * kCell;
      out << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell
          << "\" height=\"" << kCell << "\" fill=\"rgb(" << other << "," << other
          << "," << blue << ")\" stroke=\"#888\"/>\n";
      out << "  <text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 4
          << "\" font-family=\"sans-serif\" font-size=\"12\" "
             "text-anchor=\"middle\" fill=\""
          << (frac > 0.55 ? "#fff" : "#000") << "\">" << count << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

json results_to_json(const std::vector<ModelResults>& results) {
  json out = json::array();
  for (const ModelResults& r : results) {
    json j;
    j["model"] = r.model;
    if (!r.hardware.empty()) j["hardware"] = r.hardware;
    j["overall_accuracy"] = overall_accuracy(r.matrix);
    json per_class;
    const auto acc = per_class_accuracy(r.matrix);
    for (const GarmentClass c : kClassOrder) {
      if (acc.at(c))
        per_class[std::string(to_string(c))] = *acc.at(c);
      else
        per_class[std::string(to_string(c))] = nullptr;
    }
    j["per_class_accuracy"] = per_class;
    json matrix = json::array();
    for (const GarmentClass truth : kClassOrder) {
      json row = json::array();
      for (size_t col = 0; col <= ConfusionMatrix::kInvalidCol; ++col)
        row.push_back(r.matrix.at(truth, col));
      matrix.push_back(row);
    }
    j["confusion"] = matrix;
    j["timing"] = json{{"mean_s", r.timing.mean_s},
                       {"p10_s", r.timing.p10_s},
                       {"p90_s", r.timing.p90_s},
                       {"n", r.timing.n}};
    out.push_back(j);
  }
  return out;
}

}  // namespace

void emit_report(const std::vector<ModelResults>& results,
                 const std::vector<AuditFinding>& audit, ReportFormat formats,
                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  if (has_format(formats, ReportFormat::Md)) {
    std::ostringstream md;
    md << "# Benchmark report\n\n## Accuracy\n\n"
       << accuracy_table_markdown(results) << "\n## Computation times\n\n"
       << timing_table_markdown(results);
    if (!audit.empty()) {
      md << "\n## Reference-table consistency audit\n\n"
         << "| Model | sum of per-class corrects | overall corrects | flagged |\n"
         << "|---|---|---|---|\n";
      for (const AuditFinding& f : audit) {
        md << "| " << f.model << " | " << f.sum_of_class_corrects << " | "
           << f.overall_corrects << " | " << (f.flagged ? "yes" : "no") << " |\n";
      }
    }
    write_file(out_dir / "report.md", md.str());
  }

  if (has_format(formats, ReportFormat::Csv)) {
    std::ostringstream t1;
    t1 << "model,overall";
    for (const GarmentClass c : kClassOrder) t1 << "," << to_string(c);
    t1 << "\n";
    for (const ModelResults& r : results) {
      const auto acc = per_class_accuracy(r.matrix);
      t1 << r.model << "," << overall_accuracy(r.matrix);
      for (const GarmentClass c : kClassOrder) {
        t1 << ",";
        if (acc.at(c)) t1 << *acc.at(c);
      }
      t1 << "\n";
    }
    write_file(out_dir / "table1.csv", t1.str());

    std::ostringstream t2;
    t2 << "model,hardware,mean_s,p10_s,p90_s,n\n";
    for (const ModelResults& r : results) {
      t2 << r.model << "," << r.hardware << "," << r.timing.mean_s << ","
         << r.timing.p10_s << "," << r.timing.p90_s << "," << r.timing.n << "\n";
    }
    write_file(out_dir / "table2.csv", t2.str());

    for (const ModelResults& r : results)
      write_file(out_dir / ("confusion_" + sanitize_model_name(r.model) + ".csv"),
                 confusion_to_csv(r.matrix));
  }

  if (has_format(formats, ReportFormat::Json)) {
    json j;
    j["models"] = results_to_json(results);
    write_file(out_dir / "report.json", j.dump(2) + "\n");
  }

  // Heatmaps accompany every format selection.
  for (const ModelResults& r : results)
    write_file(out_dir / ("confusion_" + sanitize_model_name(r.model) + ".svg"),
               confusion_to_svg(r.matrix, r.model));

  if (!audit.empty()) {
    json j = json::array();
    for (const AuditFinding& f : audit) {
      j.push_back(json{{"model", f.model},
                       {"sum_of_class_corrects", f.sum_of_class_corrects},
                       {"overall_corrects", f.overall_corrects},
                       {"flagged", f.flagged}});
    }
    write_file(out_dir / "audit.json", j.dump(2) + "\n");
  }
}

}  // namespace sortcell::bench
