// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "prefsdm/config.hpp"
#include "prefsdm/experiment.hpp"
#include "prefsdm/inference.hpp"
#include "prefsdm/models.hpp"
#include "prefsdm/report.hpp"
#include "prefsdm/rng.hpp"
#include "fake_runs.hpp"
#include "support.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace prefsdm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  const double scale = want.norm();
  return scale > 0 ? (got - want).norm() / scale : (got - want).norm();
}

HyperParams random_hyper(RngStream& rng) {
  HyperParams h;
  h.eta = rng.normal() * 0.5;
  h.eta_star = 2.0 + rng.uniform() * 2.0;
  h.beta = 2.0 + rng.uniform() * 2.0;
  h.alpha = -1.0 + 3.0 * rng.uniform();
  h.log_range = std::log(0.2 + 0.6 * rng.uniform());
  h.log_sigma = std::log(0.5 + rng.uniform());
  h.log_tau = std::log(0.1 + 0.5 * rng.uniform());
  return h;
}

Eigen::VectorXd random_u(int n, RngStream& rng, double scale) {
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = scale * rng.normal();
  return u;
}

// Mix with a uniform indicator collapses to Pref (all a = 1) or Geo (all a = 0).
Outcome criterion1() {
  RngStream rng(101);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int side = 3 + rep % 6;
    const GridSpec g(side, side);
    const int n = 5 + static_cast<int>(rng.uniform() * 40);
    for (int a : {1, 0}) {
      auto obs = oracle::random_observations(n, rng);
      for (auto& o : obs) o.a = a;
      const Dataset d = oracle::dataset_from(obs);
      const HyperParams h = random_hyper(rng);
      const Eigen::VectorXd u = random_u(g.size(), rng, 0.7);
      const ModelKind ref = a == 1 ? ModelKind::Pref : ModelKind::Geo;
      const double v_mix = neg_log_posterior(ModelKind::Mix, h, u, d, g);
      const double v_ref = neg_log_posterior(ref, h, u, d, g);
      worst = std::max(worst, std::abs(v_mix - v_ref) / std::max(std::abs(v_ref), 1e-300));
      worst = std::max(worst, rel_err(nlp_grad_u(ModelKind::Mix, h, u, d, g), nlp_grad_u(ref, h, u, d, g)));
      worst = std::max(worst, rel_err(nlp_hess_u(ModelKind::Mix, h, u, d, g), nlp_hess_u(ref, h, u, d, g)));
    }
  }
  return {worst <= 1e-12, "max relative difference " + fmt("%.3g", worst) + " over 20 datasets x 2 indicators"};
}

// Analytic derivatives against central differences.
Outcome criterion2() {
  const GridSpec g(8, 8);
  RngStream rng(202);
  const double step = 1e-5;
  double worst_g = 0.0, worst_h = 0.0;
  for (ModelKind m : kAllModels) {
    for (int k = 0; k < 10; ++k) {
      const Dataset d = oracle::dataset_from(oracle::random_observations(30, rng));
      const HyperParams h = random_hyper(rng);
      const Eigen::VectorXd u = random_u(g.size(), rng, 0.5);
      const Eigen::VectorXd grad = nlp_grad_u(m, h, u, d, g);
      const Eigen::MatrixXd hess = nlp_hess_u(m, h, u, d, g);
      Eigen::VectorXd fd_g(g.size());
      Eigen::MatrixXd fd_h(g.size(), g.size());
      for (int i = 0; i < g.size(); ++i) {
        Eigen::VectorXd up = u, dn = u;
        up[i] += step;
        dn[i] -= step;
        fd_g[i] = (neg_log_posterior(m, h, up, d, g) - neg_log_posterior(m, h, dn, d, g)) / (2 * step);
        fd_h.col(i) = (nlp_grad_u(m, h, up, d, g) - nlp_grad_u(m, h, dn, d, g)) / (2 * step);
      }
      worst_g = std::max(worst_g, rel_err(grad, fd_g));
      worst_h = std::max(worst_h, rel_err(hess, fd_h));
    }
  }
  return {worst_g < 1e-4 && worst_h < 1e-4,
          "max relative error gradient " + fmt("%.3g", worst_g) + ", Hessian " + fmt("%.3g", worst_h)};
}

// Geo evidence against the conjugate Gaussian marginal of the marks.
Outcome criterion3() {
  RngStream rng(303);
  double worst = 0.0;
  for (int side : {2, 3, 4}) {
    for (int rep = 0; rep < 5; ++rep) {
      const GridSpec g(side, side);
      const Dataset d = oracle::dataset_from(oracle::random_observations(4 + rep * 3, rng));
      const HyperParams h = random_hyper(rng);
      const int n = static_cast<int>(d.train.size());
      const double tau2 = std::exp(2 * h.log_tau);
      const Eigen::MatrixXd a = oracle::projection(side, side, d.train);
      const Eigen::MatrixXd sigma = oracle::hand_cov(side, side, {h.range(), h.sigma(), 1.0});
      const Eigen::MatrixXd cov = a * sigma * a.transpose() + tau2 * Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd r(n);
      for (int i = 0; i < n; ++i) r[i] = d.train[i].y - h.eta;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
      const double log_det = ldlt.vectorD().array().log().sum();
      const double log_marks = -0.5 * r.dot(ldlt.solve(r)) - 0.5 * log_det - 0.5 * n * std::log(2 * oracle::kPi);
      const double homog = -n * h.beta + std::exp(h.beta);
      const double expected = log_marks - homog - oracle::hyper_prior(h, false, true);
      const double got = laplace_log_evidence(ModelKind::Geo, h, d, g);
      worst = std::max(worst, std::abs(got - expected) / std::abs(expected));
    }
  }
  return {worst < 1e-8, "max relative error " + fmt("%.3g", worst) + " on 2x2 to 4x4 grids"};
}

// One-sample KS p-value against U(0, 1).
double ks_uniform_p(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d = std::max({d, (i + 1) / n - x[i], x[i] - i / n});
  }
  const double sn = std::sqrt(n);
  return oracle::kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
}

Outcome criterion4() {
  const GridSpec g(8, 8);
  const double spacing = 1.0 / 7.0;
  const MaternParams p{3 * spacing, 1.0, 1.0};
  const int draws = 2000;
  Eigen::MatrixXd v(draws, g.size());
  for (int s = 0; s < draws; ++s) v.row(s) = sample_field(g, p, 4000 + s).values.transpose();
  const Eigen::RowVectorXd mean = v.colwise().mean();
  const Eigen::MatrixXd c = v.rowwise() - mean;
  const Eigen::VectorXd var = c.colwise().squaredNorm() / (draws - 1);
  const double mean_var = var.mean();

  // Correlation averaged over every node pair three spacings apart along an axis.
  double corr_sum = 0.0;
  int pairs = 0;
  for (int j = 0; j < 8; ++j) {
    for (int i = 0; i + 3 < 8; ++i) {
      for (auto [a, b] : {std::pair{j * 8 + i, j * 8 + i + 3}, std::pair{i * 8 + j, (i + 3) * 8 + j}}) {
        corr_sum += c.col(a).dot(c.col(b)) / std::sqrt(c.col(a).squaredNorm() * c.col(b).squaredNorm());
        ++pairs;
      }
    }
  }
  const double corr = corr_sum / pairs;

  const FieldRealization f = sample_field(g, p, 77);
  const Locations pts = preferential_points(2000, f, 0.0, 78);
  std::vector<double> xs, ys;
  for (const auto& q : pts) {
    xs.push_back(q.x);
    ys.push_back(q.y);
  }
  const double p_x = ks_uniform_p(xs), p_y = ks_uniform_p(ys);

  const bool ok = std::abs(mean_var - 1.0) <= 0.10 && std::abs(corr - 0.1) <= 0.05 && p_x > 0.001 && p_y > 0.001;
  return {ok, "variance " + fmt("%.4f", mean_var) + ", correlation at range " + fmt("%.4f", corr) +
                  ", KS p-values x " + fmt("%.3g", p_x) + " y " + fmt("%.3g", p_y)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Pref fits on purely preferential data recover alpha and the range.
Outcome criterion5(int jobs) {
  const int reps = 10;
  const double true_range = 0.5;
  std::vector<double> alpha_err(reps), range_hat(reps);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r; (r = next++) < reps;) {
      ScenarioSpec sc;
      sc.range = true_range;
      sc.prop_random = 0.0;
      sc.n_total = 400;
      sc.replicate = r;
      sc.sim.grid_nx = sc.sim.grid_ny = 24;
      const Dataset d = make_dataset(sc, 555);
      const FitResult f = fit(ModelKind::Pref, d, d.truth->grid, InferenceConfig{}, derive_seed(555, sc, "fit:pref"));
      alpha_err[r] = std::abs(f.hyper_hat.alpha - sc.sim.alpha);
      range_hat[r] = f.hyper_hat.range();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, jobs); ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  const double med_alpha = median(alpha_err);
  const double med_range = median(range_hat);
  int range_in = 0;
  for (double r : range_hat) range_in += (r >= true_range / 2 && r <= true_range * 2);
  const bool ok = med_alpha < 0.5 && med_range >= true_range / 2 && med_range <= true_range * 2;
  return {ok, "median |alpha error| " + fmt("%.3f", med_alpha) + ", median range " + fmt("%.3f", med_range) +
                  " (truth 0.5), " + std::to_string(range_in) + "/10 ranges within a factor of 2"};
}

const std::vector<ScenarioResult>& desk_results(const fs::path& workdir, int jobs) {
  static std::vector<ScenarioResult> rows;
  static bool loaded = false;
  if (loaded) return rows;
  ExperimentConfig cfg = ExperimentConfig::desk();
  const fs::path dir = workdir / "desk";
  RunOptions opts;
  opts.resume = true;
  opts.jobs = std::max(1, jobs);
  opts.log = [](const std::string& line) { std::cerr << line << '\n'; };
  run_experiment(cfg, dir, opts);
  rows = read_results(dir / kResultsFile);
  report(rows, dir / "report");
  loaded = true;
  return rows;
}

bool strictly_decreasing(const SummaryTable& t, int col) {
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    if (!(t.rows[i].mean[col] < t.rows[i - 1].mean[col])) return false;
  }
  return t.rows.size() >= 2;
}

std::string margin(const SummaryTable& t, int col) {
  std::string s;
  for (const auto& r : t.rows) s += (s.empty() ? "" : " > ") + fmt("%.4f", r.mean[col]);
  return s;
}

double cell(const CrossTable& x, int col, double range, double prop) {
  for (std::size_t i = 0; i < x.ranges.size(); ++i) {
    for (std::size_t j = 0; j < x.props.size(); ++j) {
      if (x.ranges[i] == range && x.props[j] == prop) return x.cells[col][i][j];
    }
  }
  return std::nan("");
}

// Every margin row of every factor has the column inside [lo, hi].
bool margins_within(const std::vector<ScenarioResult>& rows, AggregateMode mode, int col, double lo, double hi,
                    double& min_seen, double& max_seen) {
  bool ok = true;
  for (Factor f : {Factor::Range, Factor::PropRandom, Factor::NTotal}) {
    for (const auto& r : aggregate(rows, mode, f).rows) {
      min_seen = std::min(min_seen, r.mean[col]);
      max_seen = std::max(max_seen, r.mean[col]);
      ok = ok && r.mean[col] >= lo && r.mean[col] <= hi;
    }
  }
  return ok;
}

Outcome criterion6(const std::vector<ScenarioResult>& rows) {
  const auto by_range = aggregate(rows, AggregateMode::AbundanceVsSim, Factor::Range);
  const auto by_prop = aggregate(rows, AggregateMode::AbundanceVsSim, Factor::PropRandom);
  const bool a = strictly_decreasing(by_range, 0) && strictly_decreasing(by_prop, 0);
  const double corner = cell(cross_aggregate(rows, AggregateMode::AbundanceVsSim), 0, 0.2, 0.1);
  const bool b = corner > 1.02;
  double lo = INFINITY, hi = -INFINITY;
  const bool c1 = margins_within(rows, AggregateMode::AbundanceVsSim, 1, 0.95, 1.05, lo, hi);
  const std::string pref = "[" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]";
  lo = INFINITY;
  hi = -INFINITY;
  const bool c2 = margins_within(rows, AggregateMode::AbundanceVsSim, 2, 0.95, 1.05, lo, hi);
  const std::string mix = "[" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]";
  return {a && b && c1 && c2, std::string("(a) ") + (a ? "ok" : "no") + ": Geo/Sim by range " + margin(by_range, 0) +
                                  ", by prop " + margin(by_prop, 0) + "; (b) " + (b ? "ok" : "no") +
                                  ": Geo/Sim at (0.2, 0.1) " + fmt("%.4f", corner) + "; (c) " +
                                  (c1 && c2 ? "ok" : "no") + ": Pref/Sim " + pref + ", Mix/Sim " + mix};
}

Outcome criterion7(const std::vector<ScenarioResult>& rows) {
  const auto by_range = aggregate(rows, AggregateMode::RmsePairs, Factor::Range);
  const auto by_prop = aggregate(rows, AggregateMode::RmsePairs, Factor::PropRandom);
  const CrossTable x = cross_aggregate(rows, AggregateMode::RmsePairs);
  bool corner = true, trend = true;
  std::string detail;
  for (int col : {0, 1}) {
    const double v = cell(x, col, 0.2, 0.1);
    corner = corner && v >= 1.0;
    const bool dec = strictly_decreasing(by_range, col) && strictly_decreasing(by_prop, col);
    const bool near_one = std::abs(by_range.rows.back().mean[col] - 1.0) <= 0.10 &&
                          std::abs(by_prop.rows.back().mean[col] - 1.0) <= 0.10;
    trend = trend && dec && near_one;
    detail += by_range.columns[col] + " at (0.2, 0.1) " + fmt("%.4f", v) + ", by range " + margin(by_range, col) +
              ", by prop " + margin(by_prop, col) + "; ";
  }
  double lo = INFINITY, hi = -INFINITY;
  const bool pm = margins_within(rows, AggregateMode::RmsePairs, 2, 0.95, 1.05, lo, hi);
  detail += "Pref/Mix [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]";
  return {corner && trend && pm, detail};
}

Outcome criterion8(const std::vector<ScenarioResult>& rows) {
  std::map<std::tuple<std::string, int>, std::map<ModelKind, const ScenarioResult*>> runs;
  for (const auto& r : rows) {
    if (r.ok) runs[{r.scenario_id, r.replicate}][r.model] = &r;
  }
  std::map<ModelKind, std::vector<double>> gaps;
  for (const auto& [key, models] : runs) {
    if (models.size() != 3) continue;
    double best = INFINITY;
    for (const auto& [m, r] : models) best = std::min(best, r->waic);
    for (const auto& [m, r] : models) gaps[m].push_back((r->waic - best) / r->n_obs);
  }
  bool ok = gaps.size() == 3;
  std::string detail;
  for (ModelKind m : kAllModels) {
    const double med = gaps[m].empty() ? INFINITY : median(gaps[m]);
    ok = ok && med < 0.2;
    detail += std::string(to_string(m)) + " median " + fmt("%.4f", med) + "  ";
  }
  return {ok, detail + "over " + std::to_string(gaps[ModelKind::Geo].size()) + " runs"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion9(const fs::path& workdir) {
  const ExperimentConfig cfg = ExperimentConfig::full();
  const auto specs = scenario_grid(cfg);
  std::vector<std::string> problems;

  std::set<std::uint64_t> seeds;
  std::vector<std::string> streams = {"field", "pref", "random", "marks", "test"};
  for (ModelKind m : kAllModels) {
    streams.push_back("fit:" + std::string(to_string(m)));
    streams.push_back("draws:" + std::string(to_string(m)));
  }
  for (const auto& sc : specs) {
    for (const auto& s : streams) seeds.insert(derive_seed(cfg.master_seed, sc, s));
  }
  const std::size_t expected_seeds = specs.size() * streams.size();
  if (seeds.size() != expected_seeds) problems.push_back("seed collision");

  const fs::path dir = workdir / "harness";
  fs::remove_all(dir);
  RunOptions opts;
  opts.evaluator = fake::evaluator;
  opts.max_specs = 101;
  run_experiment(cfg, dir, opts);
  {
    std::ofstream torn(dir / kResultsFile, std::ios::app | std::ios::binary);
    torn << "{\"scenario_id\": ";
  }
  opts.max_specs = -1;
  opts.resume = true;
  opts.jobs = 4;
  run_experiment(cfg, dir, opts);
  const auto rows = read_results(dir / kResultsFile);
  if (rows.size() != 720) problems.push_back(std::to_string(rows.size()) + " rows");
  std::set<std::tuple<std::string, int, ModelKind>> keys;
  for (const auto& r : rows) keys.insert({r.scenario_id, r.replicate, r.model});
  if (keys.size() != 720) problems.push_back("duplicate rows");

  const std::string before = slurp(dir / kResultsFile);
  const RunSummary again = run_experiment(cfg, dir, opts);
  if (again.rows_written != 0 || slurp(dir / kResultsFile) != before) problems.push_back("resume not idempotent");

  std::mt19937 gen(9);
  auto shuffled = rows;
  for (int k = 0; k < 5; ++k) {
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    for (AggregateMode mode : {AggregateMode::RmsePairs, AggregateMode::AbundanceVsSim}) {
      for (Factor f : {Factor::Range, Factor::PropRandom, Factor::NTotal}) {
        const auto a = aggregate(rows, mode, f), b = aggregate(shuffled, mode, f);
        bool same = a.rows.size() == b.rows.size();
        for (std::size_t i = 0; same && i < a.rows.size(); ++i) {
          same = a.rows[i].mean == b.rows[i].mean && a.rows[i].runs == b.rows[i].runs;
        }
        if (!same) problems.push_back("aggregation depends on row order");
      }
    }
  }
  fs::remove_all(dir);
  std::string detail = std::to_string(rows.size()) + " rows, " + std::to_string(seeds.size()) + "/" +
                       std::to_string(expected_seeds) + " distinct seeds";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prefsdm acceptance suite"};
  std::string workdir = "acceptance_work";
  std::vector<int> only;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--workdir", workdir, "Directory for experiment archives (reused across runs)");
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 9));
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"model-reduction identities", criterion1}},
      {2, {"gradient and Hessian vs finite differences", criterion2}},
      {3, {"Laplace exactness on Gaussian cases", criterion3}},
      {4, {"generator statistics", criterion4}},
      {5, {"parameter recovery", [&] { return criterion5(jobs); }}},
      {6, {"abundance ratio trends", [&] { return criterion6(desk_results(workdir, jobs)); }}},
      {7, {"RMSE ratio trends", [&] { return criterion7(desk_results(workdir, jobs)); }}},
      {8, {"WAIC parity", [&] { return criterion8(desk_results(workdir, jobs)); }}},
      {9, {"harness integrity", [&] { return criterion9(workdir); }}},
  };

  int failures = 0;
  for (const auto& [id, entry] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("criterion %d %-44s %s  %s (%.1f s)\n", id, entry.first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
