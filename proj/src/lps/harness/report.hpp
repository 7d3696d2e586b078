#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lps::harness {

// One evaluation outcome: a (variant, seed) cell of the experiment matrix.
// horizon is 0 unless the row belongs to a horizon sweep.
struct ResultRow {
  std::string config_hash;
  std::string variant;
  uint64_t seed = 0;
  int64_t successes = 0;
  int64_t episodes = 0;
  int64_t horizon = 0;

  bool operator==(const ResultRow&) const = default;
};

// Line-delimited JSON records; parse(render(rows)) == rows exactly.
std::string render_results(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results(const std::string& text);
void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

// Seed-aggregated summary of one variant (and horizon, when swept).
struct SuccessReport {
  std::string config_hash;
  std::string variant;
  int64_t horizon = 0;
  std::vector<ResultRow> rows;  // one per seed, in row order

  // Pooled success rate: total successes / total episodes.
  double mean() const;
  // Population variance of the per-seed success rates.
  double variance() const;
};

// Groups rows by (variant, horizon), preserving first-appearance order.
std::vector<SuccessReport> summarize(const std::vector<ResultRow>& rows);

// Fixed-width text table of mean, variance, and per-seed rates.
std::string render_table(const std::vector<SuccessReport>& reports);

// Renders report.txt and plots from <dir>/results.jsonl: a success-vs-horizon
// plot when sweep rows are present, and a validation-loss plot when
// <dir>/curves/*.txt exist (lines of "step value").
void make_report(const std::filesystem::path& artifact_dir);

}  // namespace lps::harness
