#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fltlab {

/// One sweep cell, or an aggregate over the sampled PEs of a cell group
/// (pe_row = pe_col = -1 and aggregate "mean" or "min").
struct SweepRow {
  std::string fault_kind;
  int bit = 0;
  int stuck_value = 0;
  int pe_row = 0;
  int pe_col = 0;
  std::string mitigation;
  double accuracy = 0.0;
  double relative_error_increase = 0.0;
  std::string aggregate = "none";
};

struct SweepReport {
  double baseline_accuracy = 0.0;  // fault-free accuracy on the same array
  std::vector<SweepRow> rows;
};

enum class ReportFormat { csv, json };

ReportFormat parse_report_format(std::string_view text);

/// (err_fault - err_orig) / err_orig with err = 1 - accuracy; 0 when the
/// error rates are equal, even for a perfect baseline.
double relative_error_increase(double accuracy, double baseline_accuracy);

/// Column names shared by the CSV header and the JSON keys.
const std::vector<std::string>& report_fields();

/// CSV with a header row, or a JSON array of objects with the same keys.
/// Numbers use the shortest text that reads back to the same double.
void write_report(std::ostream& out, const SweepReport& report, ReportFormat format);

/// write_report to a file. Throws std::runtime_error naming the path if it
/// cannot be written.
void emit_report(const SweepReport& report, ReportFormat format, const std::filesystem::path& path);

/// Shortest round-trip decimal text of `v`; "nan", "inf" and "-inf" otherwise.
std::string format_number(double v);

}  // namespace fltlab
