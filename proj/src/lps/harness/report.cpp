#include "lps/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lps/core/check.hpp"
#include "lps/core/fs_util.hpp"
#include "lps/core/svg_plot.hpp"

namespace lps::harness {

std::string render_results(const std::vector<ResultRow>& rows) {
  std::string out;
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    j["config"] = row.config_hash;
    j["variant"] = row.variant;
    j["seed"] = row.seed;
    j["successes"] = row.successes;
    j["episodes"] = row.episodes;
    if (row.horizon > 0) j["horizon"] = row.horizon;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<ResultRow> parse_results(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      LPS_FAIL("bad results line '" << line << "': " << e.what());
    }
    ResultRow row;
    row.config_hash = j.at("config").get<std::string>();
    row.variant = j.at("variant").get<std::string>();
    row.seed = j.at("seed").get<uint64_t>();
    row.successes = j.at("successes").get<int64_t>();
    row.episodes = j.at("episodes").get<int64_t>();
    row.horizon = j.value("horizon", int64_t{0});
    LPS_CHECK(row.successes >= 0 && row.successes <= row.episodes,
              "results row has successes outside [0, episodes]: " << line);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  atomic_write_text(path, render_results(rows));
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  auto bytes = read_bytes(path);
  return parse_results(std::string(bytes.begin(), bytes.end()));
}

double SuccessReport::mean() const {
  int64_t succ = 0;
  int64_t total = 0;
  for (const auto& row : rows) {
    succ += row.successes;
    total += row.episodes;
  }
  LPS_CHECK(total > 0, "SuccessReport: no episodes");
  return static_cast<double>(succ) / static_cast<double>(total);
}

double SuccessReport::variance() const {
  LPS_CHECK(!rows.empty(), "SuccessReport: no rows");
  double mean_rate = 0.0;
  for (const auto& row : rows) {
    LPS_CHECK(row.episodes > 0, "SuccessReport: row with zero episodes");
    mean_rate += static_cast<double>(row.successes) / static_cast<double>(row.episodes);
  }
  mean_rate /= static_cast<double>(rows.size());
  double var = 0.0;
  for (const auto& row : rows) {
    const double rate = static_cast<double>(row.successes) / static_cast<double>(row.episodes);
    var += (rate - mean_rate) * (rate - mean_rate);
  }
  return var / static_cast<double>(rows.size());
}

std::vector<SuccessReport> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SuccessReport> reports;
  for (const auto& row : rows) {
    SuccessReport* target = nullptr;
    for (auto& report : reports) {
      if (report.variant == row.variant && report.horizon == row.horizon) {
        target = &report;
        break;
      }
    }
    if (target == nullptr) {
      reports.push_back(SuccessReport{row.config_hash, row.variant, row.horizon, {}});
      target = &reports.back();
    }
    target->rows.push_back(row);
  }
  return reports;
}

std::string render_table(const std::vector<SuccessReport>& reports) {
  std::string out =
      "variant          horizon  seeds  mean    variance  per-seed\n"
      "---------------  -------  -----  ------  --------  --------\n";
  char buf[160];
  for (const auto& report : reports) {
    std::string per_seed;
    for (const auto& row : report.rows) {
      std::snprintf(buf, sizeof(buf), "%s%.2f",
                    per_seed.empty() ? "" : " ",
                    static_cast<double>(row.successes) / static_cast<double>(row.episodes));
      per_seed += buf;
    }
    std::string horizon = report.horizon > 0 ? std::to_string(report.horizon) : "-";
    std::snprintf(buf, sizeof(buf), "%-15s  %-7s  %-5zu  %.4f  %.6f  %s\n",
                  report.variant.c_str(), horizon.c_str(), report.rows.size(), report.mean(),
                  report.variance(), per_seed.c_str());
    out += buf;
  }
  return out;
}

namespace {

void write_horizon_plot(const std::filesystem::path& path,
                        const std::vector<SuccessReport>& reports) {
  std::map<std::string, PlotSeries> by_variant;
  std::vector<int64_t> horizons;
  for (const auto& report : reports) {
    if (report.horizon <= 0) continue;
    auto& series = by_variant[report.variant];
    series.name = report.variant;
    series.xs.push_back(static_cast<double>(report.horizon));
    series.ys.push_back(report.mean());
    horizons.push_back(report.horizon);
  }
  if (by_variant.empty()) return;
  std::sort(horizons.begin(), horizons.end());
  horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());

  PlotSpec spec;
  spec.title = "success rate vs plan horizon";
  spec.x_label = "horizon";
  spec.y_label = "success rate";
  std::string swept;
  for (size_t i = 0; i < horizons.size(); ++i) {
    if (i) swept += ",";
    swept += std::to_string(horizons[i]);
  }
  spec.metadata["horizons"] = swept;
  for (auto& [name, series] : by_variant) {
    // Points arrive in row order; plot left to right.
    std::vector<size_t> order(series.xs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return series.xs[a] < series.xs[b]; });
    PlotSeries sorted;
    sorted.name = series.name;
    for (size_t i : order) {
      sorted.xs.push_back(series.xs[i]);
      sorted.ys.push_back(series.ys[i]);
    }
    spec.series.push_back(std::move(sorted));
  }
  write_svg_plot(path, spec);
}

void write_curve_plot(const std::filesystem::path& path, const std::filesystem::path& curve_dir) {
  if (!std::filesystem::is_directory(curve_dir)) return;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(curve_dir)) {
    if (entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  if (files.empty()) return;
  std::sort(files.begin(), files.end());

  PlotSpec spec;
  spec.title = "validation reconstruction loss";
  spec.x_label = "gradient step";
  spec.y_label = "loss";
  std::string names;
  for (const auto& file : files) {
    PlotSeries series;
    series.name = file.stem().string();
    auto bytes = read_bytes(file);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    double step = 0.0;
    double value = 0.0;
    while (in >> step >> value) {
      series.xs.push_back(step);
      series.ys.push_back(value);
    }
    LPS_CHECK(!series.xs.empty(), "empty curve file " << file.string());
    if (!names.empty()) names += ",";
    names += series.name;
    spec.series.push_back(std::move(series));
  }
  spec.metadata["curves"] = names;
  write_svg_plot(path, spec);
}

}  // namespace

void make_report(const std::filesystem::path& artifact_dir) {
  const auto results_path = artifact_dir / "results.jsonl";
  LPS_CHECK(std::filesystem::exists(results_path),
            "make_report: no results at " << results_path.string());
  auto rows = read_results(results_path);
  LPS_CHECK(!rows.empty(), "make_report: results file is empty");
  auto reports = summarize(rows);
  atomic_write_text(artifact_dir / "report.txt", render_table(reports));
  write_horizon_plot(artifact_dir / "success_vs_horizon.svg", reports);
  write_curve_plot(artifact_dir / "pretrain_vs_scratch.svg", artifact_dir / "curves");
}

}  // namespace lps::harness
