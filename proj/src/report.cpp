#include "prefsdm/report.hpp"

#include "prefsdm/error.hpp"
#include "prefsdm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace prefsdm {
namespace {

struct RunKey {
  double range;
  double prop;
  int n;
  int replicate;
  auto operator<=>(const RunKey&) const = default;
};

struct Run {
  RunKey key;
  std::array<const ScenarioResult*, 3> by_model{};  // geo, pref, mix
};

int model_slot(ModelKind m) {
  switch (m) {
    case ModelKind::Geo: return 0;
    case ModelKind::Pref: return 1;
    case ModelKind::Mix: return 2;
  }
  return 0;
}

// Complete runs in canonical key order.
std::vector<Run> complete_runs(const std::vector<ScenarioResult>& results) {
  std::map<RunKey, Run> runs;
  for (const auto& r : results) {
    const RunKey key{r.range, r.prop_random, r.n_total, r.replicate};
    Run& run = runs[key];
    run.key = key;
    auto& slot = run.by_model[model_slot(r.model)];
    if (slot) {
      fail(Errc::invalid_argument, "duplicate result row for " + r.scenario_id + " replicate " +
                                       std::to_string(r.replicate) + " model " +
                                       std::string(to_string(r.model)));
    }
    slot = &r;
  }
  std::vector<Run> out;
  for (auto& [key, run] : runs) {
    const bool ok = std::all_of(run.by_model.begin(), run.by_model.end(),
                                [](const ScenarioResult* r) { return r && r->ok; });
    if (ok) out.push_back(run);
  }
  return out;
}

std::array<double, 3> run_ratios(const Run& run, AggregateMode mode) {
  const auto& [g, p, m] = run.by_model;
  if (mode == AggregateMode::RmsePairs) return {g->rmse / p->rmse, g->rmse / m->rmse, p->rmse / m->rmse};
  return {g->abundance_ratio, p->abundance_ratio, m->abundance_ratio};
}

std::array<std::string, 3> column_names(AggregateMode mode) {
  if (mode == AggregateMode::RmsePairs) return {"Geo/Pref", "Geo/Mix", "Pref/Mix"};
  return {"Geo/Sim", "Pref/Sim", "Mix/Sim"};
}

double level_of(const RunKey& k, Factor f) {
  switch (f) {
    case Factor::Range: return k.range;
    case Factor::PropRandom: return k.prop;
    case Factor::NTotal: return k.n;
  }
  return 0.0;
}

std::string num(double v, int prec = 4) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string level_label(double v, Factor f) {
  if (f == Factor::NTotal) return std::to_string(static_cast<int>(v));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Linear-interpolated quantile of a sorted sample.
double quantile(const std::vector<double>& xs, double q) {
  const double pos = q * (xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - lo) * (xs[hi] - xs[lo]);
}

const char* kModelColors[3] = {"#4c72b0", "#dd8452", "#55a868"};

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + p.string());
  out << text;
  if (!out.flush()) fail(Errc::io, "write failed for " + p.string());
}

}  // namespace

std::string_view to_string(AggregateMode mode) {
  return mode == AggregateMode::RmsePairs ? "rmse" : "abundance";
}

std::string_view to_string(Factor factor) {
  switch (factor) {
    case Factor::Range: return "range";
    case Factor::PropRandom: return "prop_random";
    case Factor::NTotal: return "n_total";
  }
  return "?";
}

AggregateMode parse_aggregate_mode(std::string_view s) {
  if (s == "rmse") return AggregateMode::RmsePairs;
  if (s == "abundance") return AggregateMode::AbundanceVsSim;
  fail(Errc::invalid_argument, "unknown aggregate mode '" + std::string(s) + "'");
}

Factor parse_factor(std::string_view s) {
  if (s == "range") return Factor::Range;
  if (s == "prop_random") return Factor::PropRandom;
  if (s == "n_total") return Factor::NTotal;
  fail(Errc::invalid_argument, "unknown factor '" + std::string(s) + "'");
}

SummaryTable aggregate(const std::vector<ScenarioResult>& results, AggregateMode mode, Factor factor) {
  SummaryTable t;
  t.mode = mode;
  t.factor = factor;
  t.columns = column_names(mode);
  std::map<double, SummaryRow> rows;
  for (const Run& run : complete_runs(results)) {
    const double level = level_of(run.key, factor);
    SummaryRow& row = rows[level];
    row.level = level;
    const auto r = run_ratios(run, mode);
    for (int c = 0; c < 3; ++c) row.mean[c] += r[c];
    ++row.runs;
  }
  for (auto& [level, row] : rows) {
    for (double& m : row.mean) m /= row.runs;
    t.rows.push_back(row);
  }
  return t;
}

CrossTable cross_aggregate(const std::vector<ScenarioResult>& results, AggregateMode mode) {
  CrossTable t;
  t.mode = mode;
  t.columns = column_names(mode);
  const auto runs = complete_runs(results);
  for (const Run& run : runs) {
    t.ranges.push_back(run.key.range);
    t.props.push_back(run.key.prop);
  }
  for (auto* v : {&t.ranges, &t.props}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  const std::size_t nr = t.ranges.size(), np = t.props.size();
  std::vector<std::vector<int>> counts(nr, std::vector<int>(np, 0));
  for (auto& c : t.cells) c.assign(nr, std::vector<double>(np, 0.0));
  for (const Run& run : runs) {
    const auto i = std::lower_bound(t.ranges.begin(), t.ranges.end(), run.key.range) - t.ranges.begin();
    const auto j = std::lower_bound(t.props.begin(), t.props.end(), run.key.prop) - t.props.begin();
    const auto r = run_ratios(run, mode);
    for (int c = 0; c < 3; ++c) t.cells[c][i][j] += r[c];
    ++counts[i][j];
  }
  for (auto& c : t.cells) {
    for (std::size_t i = 0; i < nr; ++i) {
      for (std::size_t j = 0; j < np; ++j) {
        c[i][j] = counts[i][j] ? c[i][j] / counts[i][j] : std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return t;
}

std::string render_text(const SummaryTable& t) {
  std::ostringstream os;
  os << (t.mode == AggregateMode::RmsePairs ? "Mean RMSE ratio" : "Mean abundance ratio") << " by "
     << to_string(t.factor) << '\n';
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s %10s %10s %10s %6s\n", std::string(to_string(t.factor)).c_str(),
                t.columns[0].c_str(), t.columns[1].c_str(), t.columns[2].c_str(), "runs");
  os << buf;
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%-12s %10.4f %10.4f %10.4f %6d\n", level_label(r.level, t.factor).c_str(),
                  r.mean[0], r.mean[1], r.mean[2], r.runs);
    os << buf;
  }
  return os.str();
}

std::string render_csv(const SummaryTable& t) {
  std::ostringstream os;
  os << to_string(t.factor) << ',' << t.columns[0] << ',' << t.columns[1] << ',' << t.columns[2] << ",runs\n";
  for (const auto& r : t.rows) {
    os << level_label(r.level, t.factor) << ',' << num(r.mean[0], 6) << ',' << num(r.mean[1], 6) << ','
       << num(r.mean[2], 6) << ',' << r.runs << '\n';
  }
  return os.str();
}

std::string boxplot_svg(const std::vector<ScenarioResult>& results, Factor factor) {
  // Abundance ratio distribution per model at each factor level.
  std::map<double, std::array<std::vector<double>, 3>> groups;
  for (const Run& run : complete_runs(results)) {
    auto& g = groups[level_of(run.key, factor)];
    const auto r = run_ratios(run, AggregateMode::AbundanceVsSim);
    for (int c = 0; c < 3; ++c) g[c].push_back(r[c]);
  }
  double lo = 1.0, hi = 1.0;
  for (auto& [level, g] : groups) {
    for (auto& v : g) {
      std::sort(v.begin(), v.end());
      lo = std::min(lo, v.front());
      hi = std::max(hi, v.back());
    }
  }
  const double pad = 0.05 * (hi - lo) + 1e-3;
  lo -= pad;
  hi += pad;

  const double W = 640, H = 400, left = 60, right = 130, top = 30, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto ymap = [&](double v) { return top + ph * (hi - v) / (hi - lo); };
  const std::size_t ng = std::max<std::size_t>(groups.size(), 1);
  const double gw = pw / ng, bw = gw / 5.0;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
     << W << ' ' << H << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
     << "<text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">Abundance ratio by "
     << xml_escape(to_string(factor)) << "</text>\n"
     << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  const double y1 = ymap(1.0);
  os << "<line x1=\"" << left << "\" y1=\"" << num(y1, 2) << "\" x2=\"" << left + pw << "\" y2=\"" << num(y1, 2)
     << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << num(ymap(v) + 4, 2)
       << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << num(v, 2) << "</text>\n";
  }
  std::size_t gi = 0;
  for (const auto& [level, g] : groups) {
    const double gx = left + gi * gw;
    os << "<text x=\"" << num(gx + gw / 2, 2) << "\" y=\"" << H - bottom + 18
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
       << xml_escape(level_label(level, factor)) << "</text>\n";
    for (int c = 0; c < 3; ++c) {
      const auto& v = g[c];
      if (v.empty()) continue;
      const double q1 = quantile(v, 0.25), med = quantile(v, 0.5), q3 = quantile(v, 0.75);
      const double iqr = q3 - q1;
      double wlo = q1, whi = q3;
      for (double x : v) {
        if (x >= q1 - 1.5 * iqr) wlo = std::min(wlo, x);
        if (x <= q3 + 1.5 * iqr) whi = std::max(whi, x);
      }
      const double x0 = gx + bw * (c + 1), xm = x0 + bw / 2;
      os << "<g stroke=\"black\" fill=\"" << kModelColors[c] << "\">\n"
         << "<line x1=\"" << num(xm, 2) << "\" y1=\"" << num(ymap(whi), 2) << "\" x2=\"" << num(xm, 2)
         << "\" y2=\"" << num(ymap(wlo), 2) << "\"/>\n"
         << "<rect x=\"" << num(x0 + 2, 2) << "\" y=\"" << num(ymap(q3), 2) << "\" width=\"" << num(bw - 4, 2)
         << "\" height=\"" << num(std::max(ymap(q1) - ymap(q3), 0.5), 2) << "\"/>\n"
         << "<line x1=\"" << num(x0 + 2, 2) << "\" y1=\"" << num(ymap(med), 2) << "\" x2=\""
         << num(x0 + bw - 2, 2) << "\" y2=\"" << num(ymap(med), 2) << "\" stroke-width=\"2\"/>\n";
      for (double x : v) {
        if (x < wlo || x > whi) {
          os << "<circle cx=\"" << num(xm, 2) << "\" cy=\"" << num(ymap(x), 2) << "\" r=\"2.5\"/>\n";
        }
      }
      os << "</g>\n";
    }
    ++gi;
  }
  const auto names = column_names(AggregateMode::AbundanceVsSim);
  for (int c = 0; c < 3; ++c) {
    const double ly = top + 10 + 20 * c;
    os << "<rect x=\"" << left + pw + 15 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\""
       << kModelColors[c] << "\"/>\n"
       << "<text x=\"" << left + pw + 32 << "\" y=\"" << ly + 10
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << names[c] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string heatmap_svg(const CrossTable& t) {
  const std::size_t nr = t.ranges.size(), np = t.props.size();
  double lo = 1.0, hi = 1.0;
  for (const auto& c : t.cells) {
    for (const auto& row : c) {
      for (double v : row) {
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
  }
  // Diverging scale centred on 1.
  const double span = std::max({hi - 1.0, 1.0 - lo, 1e-6});
  auto color = [&](double v) {
    if (!std::isfinite(v)) return std::string("#dddddd");
    const double s = std::clamp((v - 1.0) / span, -1.0, 1.0);
    int r = 255, g = 255, b = 255;
    if (s > 0) {
      g = b = static_cast<int>(std::lround(255 * (1 - s)));
    } else {
      r = g = static_cast<int>(std::lround(255 * (1 + s)));
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };

  const double cell = 56, panel_gap = 40, left = 60, top = 50;
  const double panel_w = cell * std::max<std::size_t>(np, 1);
  const double W = left + 3 * panel_w + 2 * panel_gap + 20;
  const double H = top + cell * std::max<std::size_t>(nr, 1) + 50;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
     << W << ' ' << H << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
     << "<text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">"
     << (t.mode == AggregateMode::RmsePairs ? "Mean RMSE ratio" : "Mean abundance ratio")
     << " (rows: range, columns: prop_random)</text>\n";
  for (int c = 0; c < 3; ++c) {
    const double px = left + c * (panel_w + panel_gap);
    os << "<text x=\"" << num(px + panel_w / 2, 2) << "\" y=\"" << top - 8
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << xml_escape(t.columns[c])
       << "</text>\n";
    for (std::size_t i = 0; i < nr; ++i) {
      const double y = top + cell * i;
      if (c == 0) {
        os << "<text x=\"" << left - 6 << "\" y=\"" << num(y + cell / 2 + 4, 2)
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
           << level_label(t.ranges[i], Factor::Range) << "</text>\n";
      }
      for (std::size_t j = 0; j < np; ++j) {
        const double x = px + cell * j;
        const double v = t.cells[c][i][j];
        os << "<rect x=\"" << num(x, 2) << "\" y=\"" << num(y, 2) << "\" width=\"" << cell << "\" height=\""
           << cell << "\" fill=\"" << color(v) << "\" stroke=\"white\"/>\n"
           << "<text x=\"" << num(x + cell / 2, 2) << "\" y=\"" << num(y + cell / 2 + 4, 2)
           << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << num(v, 3)
           << "</text>\n";
      }
    }
    for (std::size_t j = 0; j < np; ++j) {
      os << "<text x=\"" << num(px + cell * j + cell / 2, 2) << "\" y=\"" << num(top + cell * nr + 16, 2)
         << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
         << level_label(t.props[j], Factor::PropRandom) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::filesystem::path> report(const std::vector<ScenarioResult>& results,
                                          const std::filesystem::path& outdir) {
  if (complete_runs(results).empty()) {
    fail(Errc::invalid_argument, "no complete run (all three models ok) to report");
  }
  std::filesystem::create_directories(outdir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const auto p = outdir / name;
    write_file(p, text);
    written.push_back(p);
  };
  std::string combined;
  for (AggregateMode mode : {AggregateMode::RmsePairs, AggregateMode::AbundanceVsSim}) {
    for (Factor f : {Factor::Range, Factor::PropRandom, Factor::NTotal}) {
      const SummaryTable t = aggregate(results, mode, f);
      const std::string stem = "summary_" + std::string(to_string(mode)) + "_by_" + std::string(to_string(f));
      emit(stem + ".csv", render_csv(t));
      combined += render_text(t) + '\n';
    }
  }
  emit("summary.txt", combined);
  emit("boxplot_abundance_by_range.svg", boxplot_svg(results, Factor::Range));
  emit("boxplot_abundance_by_prop_random.svg", boxplot_svg(results, Factor::PropRandom));
  emit("heatmap_rmse.svg", heatmap_svg(cross_aggregate(results, AggregateMode::RmsePairs)));
  emit("heatmap_abundance.svg", heatmap_svg(cross_aggregate(results, AggregateMode::AbundanceVsSim)));
  emit("results.csv", results_csv(results));
  return written;
}

}  // namespace prefsdm
