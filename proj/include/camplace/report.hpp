#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "camplace/error.hpp"
#include "json.hpp"

namespace camplace {

/// One optimizer/agent run on one scene variant.
struct RunReport {
  std::string scene;
  double rotation_deg = 0.0;
  std::string approach;
  double final_error = 0.0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

/// FNV-1a over the canonical dump. nlohmann::json keeps object keys sorted,
/// so the digest does not depend on the order fields were inserted.
inline std::string config_digest(const nlohmann::json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline constexpr const char* kReportHeader =
    "scene,rotation_deg,approach,final_error,wall_time_s,seed,config_digest";

inline std::string format_report_row(const RunReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%.6f,%s,%.6f,%.6f,%llu,%s", r.scene.c_str(), r.rotation_deg,
                r.approach.c_str(), r.final_error, r.wall_time_s,
                static_cast<unsigned long long>(r.seed), r.config_digest.c_str());
  return buf;
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}
}  // namespace detail

/// Reads report rows; requires scene, approach and final_error columns.
inline std::vector<RunReport> read_report_rows(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::missing_column, source + ": empty file");
  const auto header = detail::split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"scene", "approach", "final_error"}) {
    if (!col.count(need)) {
      throw Error(Errc::missing_column, source + ": no '" + need + "' column");
    }
  }
  std::vector<RunReport> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() < header.size()) {
      throw Error(Errc::missing_column, source + ":" + std::to_string(line_no) + ": short row");
    }
    RunReport r;
    r.scene = cells[col["scene"]];
    r.approach = cells[col["approach"]];
    try {
      r.final_error = std::stod(cells[col["final_error"]]);
      if (col.count("rotation_deg")) r.rotation_deg = std::stod(cells[col["rotation_deg"]]);
      if (col.count("wall_time_s")) r.wall_time_s = std::stod(cells[col["wall_time_s"]]);
      if (col.count("seed")) r.seed = std::stoull(cells[col["seed"]]);
    } catch (const std::exception&) {
      throw Error(Errc::parse_error, source + ":" + std::to_string(line_no) + ": bad number");
    }
    if (col.count("config_digest")) r.config_digest = cells[col["config_digest"]];
    rows.push_back(std::move(r));
  }
  return rows;
}

struct SceneAggregate {
  std::string approach;
  std::string scene;
  std::size_t variants = 0;
  double mean_error = 0.0;
};

struct ApproachTotal {
  std::string approach;
  std::size_t scenes = 0;
  double total_error = 0.0;
  double total_wall_time_s = 0.0;
};

struct ReportSummary {
  std::vector<SceneAggregate> scenes;
  std::vector<ApproachTotal> totals;
};

/// Averages each scene over its rotated variants, then sums the averages per
/// approach. Output is sorted by approach, then scene.
inline ReportSummary aggregate_reports(const std::vector<RunReport>& rows) {
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
  std::map<std::string, double> time;
  for (const auto& r : rows) {
    auto& a = acc[{r.approach, r.scene}];
    a.first += r.final_error;
    a.second += 1;
    time[r.approach] += r.wall_time_s;
  }
  ReportSummary out;
  std::map<std::string, ApproachTotal> totals;
  for (const auto& [key, sum] : acc) {
    const double mean = sum.first / static_cast<double>(sum.second);
    out.scenes.push_back({key.first, key.second, sum.second, mean});
    auto& t = totals[key.first];
    t.approach = key.first;
    t.scenes += 1;
    t.total_error += mean;
  }
  for (auto& [name, t] : totals) {
    t.total_wall_time_s = time[name];
    out.totals.push_back(t);
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const ReportSummary& s) {
  out << "kind,approach,scene,count,error,wall_time_s\n";
  char buf[512];
  for (const auto& a : s.scenes) {
    std::snprintf(buf, sizeof(buf), "scene,%s,%s,%zu,%.6f,\n", a.approach.c_str(), a.scene.c_str(),
                  a.variants, a.mean_error);
    out << buf;
  }
  for (const auto& t : s.totals) {
    std::snprintf(buf, sizeof(buf), "total,%s,*,%zu,%.6f,%.6f\n", t.approach.c_str(), t.scenes,
                  t.total_error, t.total_wall_time_s);
    out << buf;
  }
}

}  // namespace camplace
