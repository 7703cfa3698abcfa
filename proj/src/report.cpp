#include "fltlab/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fltlab {

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::csv;
  if (text == "json") return ReportFormat::json;
  throw std::invalid_argument("unknown report format '" + std::string(text) + "' (expected csv or json)");
}

double relative_error_increase(double accuracy, double baseline_accuracy) {
  const double err_orig = 1.0 - baseline_accuracy;
  const double delta = (1.0 - accuracy) - err_orig;
  // A perfect baseline leaves the ratio undefined; equal error rates still mean no increase.
  if (delta == 0.0) return 0.0;
  return delta / err_orig;
}

const std::vector<std::string>& report_fields() {
  static const std::vector<std::string> fields{"fault_kind", "bit",      "stuck_value",
                                               "pe_row",     "pe_col",   "mitigation",
                                               "accuracy",   "relative_error_increase", "aggregate"};
  return fields;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

// JSON has no NaN or infinity; those become strings matching the CSV text.
nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

}  // namespace

void write_report(std::ostream& out, const SweepReport& report, ReportFormat format) {
  if (format == ReportFormat::csv) {
    const auto& fields = report_fields();
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
    out << '\n';
    for (const SweepRow& r : report.rows) {
      out << r.fault_kind << ',' << r.bit << ',' << r.stuck_value << ',' << r.pe_row << ',' << r.pe_col << ','
          << r.mitigation << ',' << format_number(r.accuracy) << ',' << format_number(r.relative_error_increase)
          << ',' << r.aggregate << '\n';
    }
    return;
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const SweepRow& r : report.rows) {
    rows.push_back({{"fault_kind", r.fault_kind},
                    {"bit", r.bit},
                    {"stuck_value", r.stuck_value},
                    {"pe_row", r.pe_row},
                    {"pe_col", r.pe_col},
                    {"mitigation", r.mitigation},
                    {"accuracy", json_number(r.accuracy)},
                    {"relative_error_increase", json_number(r.relative_error_increase)},
                    {"aggregate", r.aggregate}});
  }
  out << rows.dump(2) << '\n';
}

void emit_report(const SweepReport& report, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write report '" + path.string() + "'");
  write_report(f, report, format);
  f.flush();
  if (!f) throw std::runtime_error("write failed for report '" + path.string() + "'");
}

}  // namespace fltlab
