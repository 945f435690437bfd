// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ddc {

/// One line of the comparison table. A run directory contributes its best
/// record; a teacher directory contributes a reference row.
struct ReportRow {
  std::string method;
  bool complete = false;
  double accuracy = 0.0;
  double accuracy_drop = 0.0;     // teacher accuracy minus student accuracy
  long long parameters = 0;
  double compression_ratio = 0.0; // teacher parameters / student parameters
  double latency = 0.0;
  double speedup = 0.0;           // teacher latency / student latency
  double reward = 0.0;
};

/// Reads best/record.json (run dirs) or reference.json (teacher dirs).
/// Directories without either yield an incomplete row.
std::vector<ReportRow> collect_report_rows(const std::vector<std::filesystem::path>& dirs);

std::string render_report_text(const std::vector<ReportRow>& rows);
std::string render_report_csv(const std::vector<ReportRow>& rows);

}  // namespace ddc
