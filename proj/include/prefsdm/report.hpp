#pragma once

#include "prefsdm/metrics.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace prefsdm {

enum class AggregateMode { RmsePairs, AbundanceVsSim };
enum class Factor { Range, PropRandom, NTotal };

std::string_view to_string(AggregateMode mode);
std::string_view to_string(Factor factor);
AggregateMode parse_aggregate_mode(std::string_view s);
Factor parse_factor(std::string_view s);

// One run = one (scenario, replicate) with ok rows for all three models.
// RmsePairs columns: Geo/Pref, Geo/Mix, Pref/Mix RMSE ratios.
// AbundanceVsSim columns: Geo/Sim, Pref/Sim, Mix/Sim abundance ratios.
struct SummaryRow {
  double level = 0.0;
  std::array<double, 3> mean{};
  int runs = 0;
};

struct SummaryTable {
  AggregateMode mode = AggregateMode::RmsePairs;
  Factor factor = Factor::Range;
  std::array<std::string, 3> columns;
  std::vector<SummaryRow> rows;  // ascending level
};

// Per-run ratios, averaged over all runs sharing a factor level. Runs are
// summed in a canonical order, so the result does not depend on row order.
SummaryTable aggregate(const std::vector<ScenarioResult>& results, AggregateMode mode, Factor factor);

// Mean ratios over the range x prop_random cross.
struct CrossTable {
  AggregateMode mode = AggregateMode::RmsePairs;
  std::array<std::string, 3> columns;
  std::vector<double> ranges;
  std::vector<double> props;
  // cells[c][i][j]: column c, range i, prop j; NaN when no run exists.
  std::array<std::vector<std::vector<double>>, 3> cells;
};

CrossTable cross_aggregate(const std::vector<ScenarioResult>& results, AggregateMode mode);

std::string render_text(const SummaryTable& t);
std::string render_csv(const SummaryTable& t);
std::string boxplot_svg(const std::vector<ScenarioResult>& results, Factor factor);
std::string heatmap_svg(const CrossTable& t);

// Writes all summary tables (CSV + text), box plots, heat maps and a CSV
// export of the rows. Throws before touching the filesystem when there is no
// complete run to report.
std::vector<std::filesystem::path> report(const std::vector<ScenarioResult>& results,
                                          const std::filesystem::path& outdir);

}  // namespace prefsdm
