// SPDX-License-Identifier: Apache-2.0
#include "ddc/report.hpp"

#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ddc/reward.hpp"

namespace ddc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ReportRow teacher_row(const fs::path& dir) {
  std::ifstream in(dir / "reference.json");
  json j = json::parse(in);
  ReportRow row;
  row.method = "teacher";
  row.complete = true;
  row.accuracy = j.at("accuracy").get<double>();
  row.accuracy_drop = 0.0;
  row.parameters = j.at("parameters").get<long long>();
  row.compression_ratio = 1.0;
  row.latency = j.at("latency").get<double>();
  row.speedup = 1.0;
  TeacherReference ref{row.accuracy, row.latency, row.parameters};
  row.reward = combined_reward(row.accuracy, row.latency, row.parameters, ref, {}).combined;
  return row;
}

ReportRow run_row(const fs::path& dir) {
  std::ifstream in(dir / "best" / "record.json");
  json j = json::parse(in);
  ReportRow row;
  row.method = j.value("method", dir.filename().string());
  row.complete = true;
  row.accuracy = j.at("accuracy").get<double>();
  row.parameters = j.at("parameters").get<long long>();
  row.latency = j.at("latency").get<double>();
  row.reward = j.at("reward").get<double>();
  const auto& t = j.at("teacher");
  row.accuracy_drop = t.at("accuracy").get<double>() - row.accuracy;
  row.compression_ratio =
      static_cast<double>(t.at("parameters").get<long long>()) /
      static_cast<double>(row.parameters);
  row.speedup = t.at("latency").get<double>() / row.latency;
  return row;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace

std::vector<ReportRow> collect_report_rows(const std::vector<fs::path>& dirs) {
  std::vector<ReportRow> rows;
  for (const auto& dir : dirs) {
    if (fs::exists(dir / "best" / "record.json")) {
      rows.push_back(run_row(dir));
    } else if (fs::exists(dir / "reference.json")) {
      rows.push_back(teacher_row(dir));
    } else {
      ReportRow row;
      row.method = dir.filename().string();
      row.complete = false;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string render_report_text(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "method" << std::right << std::setw(10) << "accuracy"
      << std::setw(10) << "drop" << std::setw(12) << "params" << std::setw(10) << "ratio"
      << std::setw(14) << "latency_s" << std::setw(10) << "speedup" << std::setw(12) << "reward"
      << "\n";
  out << std::string(90, '-') << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << r.method << std::right;
    if (!r.complete) {
      out << std::setw(78) << "(incomplete: no record found)"
          << "\n";
      continue;
    }
    out << std::setw(10) << fmt(r.accuracy) << std::setw(10) << fmt(r.accuracy_drop)
        << std::setw(12) << r.parameters << std::setw(10) << fmt(r.compression_ratio)
        << std::setw(14) << fmt(r.latency, 5) << std::setw(10) << fmt(r.speedup) << std::setw(12)
        << fmt(r.reward) << "\n";
  }
  return out.str();
}

std::string render_report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "method,complete,accuracy,accuracy_drop,parameters,compression_ratio,latency_s,"
         "speedup,reward\n";
  for (const auto& r : rows) {
    out << r.method << "," << (r.complete ? "true" : "false") << ",";
    if (r.complete)
      out << fmt(r.accuracy, 10) << "," << fmt(r.accuracy_drop, 10) << "," << r.parameters << ","
          << fmt(r.compression_ratio, 10) << "," << fmt(r.latency, 10) << ","
          << fmt(r.speedup, 10) << "," << fmt(r.reward, 10);
    else
      out << ",,,,,,";
    out << "\n";
  }
  return out.str();
}

}  // namespace ddc
