#include "prefsdm/samplers.hpp"

#include "prefsdm/error.hpp"
#include "prefsdm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

namespace prefsdm {

int Dataset::count_preferential() const {
  return static_cast<int>(
      std::count_if(train.begin(), train.end(), [](const Observation& o) { return o.a == 1; }));
}

void Dataset::validate() const {
  for (const auto& o : train) {
    if (o.a != 0 && o.a != 1) fail(Errc::invalid_argument, "sampling indicator must be 0 or 1");
    if (!std::isfinite(o.y) || !std::isfinite(o.location.x) || !std::isfinite(o.location.y)) {
      fail(Errc::invalid_argument, "observation has non-finite values");
    }
  }
}

namespace {

Point draw_uniform(RngStream& rng, const Rect& d) {
  const double x = d.x0 + rng.uniform() * d.width();
  const double y = d.y0 + rng.uniform() * d.height();
  return {x, y};
}

}  // namespace

Locations uniform_points(int n, const GridSpec& grid, std::uint64_t seed) {
  if (n < 0) fail(Errc::invalid_argument, "point count must be nonnegative");
  RngStream rng(seed);
  Locations out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(draw_uniform(rng, grid.domain()));
  return out;
}

Locations preferential_points(int n, const FieldRealization& f, double alpha, std::uint64_t seed) {
  if (n < 0) fail(Errc::invalid_argument, "point count must be nonnegative");
  if (!std::isfinite(alpha)) fail(Errc::invalid_argument, "alpha must be finite");

  // Bilinear interpolation never exceeds the node maximum, so the node
  // maximum of alpha * u bounds the log density everywhere.
  const double log_envelope = (alpha * f.values).maxCoeff();
  if (!std::isfinite(log_envelope)) fail(Errc::numeric, "non-finite rejection envelope");

  constexpr long long kMaxProposals = 200'000'000;
  RngStream rng(seed);
  Locations out;
  out.reserve(static_cast<std::size_t>(n));
  long long proposals = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++proposals > kMaxProposals) fail(Errc::numeric, "rejection sampler exceeded proposal cap");
    const Point s = draw_uniform(rng, f.grid.domain());
    const double log_accept = alpha * interpolate(f, s) - log_envelope;
    if (std::log(rng.uniform()) < log_accept) out.push_back(s);
  }
  return out;
}

std::vector<double> generate_marks(const Locations& locs, const FieldRealization& f, double eta,
                                   double tau, std::uint64_t seed) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) fail(Errc::invalid_argument, "tau must be >= 0");
  const CounterRng rng(seed);
  std::vector<double> marks;
  marks.reserve(locs.size());
  for (std::size_t i = 0; i < locs.size(); ++i) {
    const double mean = eta + interpolate(f, locs[i]);
    marks.push_back(tau == 0.0 ? mean : mean + tau * rng.normal(i));
  }
  return marks;
}

int preferential_count(int n_total, double prop_random) {
  if (n_total < 0) fail(Errc::invalid_argument, "total sample count must be nonnegative");
  if (!(prop_random >= 0.0 && prop_random <= 1.0)) {
    fail(Errc::invalid_argument, "proportion of random samples must lie in [0, 1]");
  }
  // The epsilon absorbs representation error such as 60 * 0.75 = 44.99999...
  return static_cast<int>(std::floor(n_total * (1.0 - prop_random) + 0.5 + 1e-9));
}

Dataset make_dataset(const ScenarioSpec& sc, std::uint64_t master_seed) {
  if (sc.n_total < 1) fail(Errc::invalid_argument, "scenario needs at least one sample");
  if (sc.sim.n_test < 0) fail(Errc::invalid_argument, "test-set size must be nonnegative");
  const SimulationConstants& c = sc.sim;
  const GridSpec grid(c.grid_nx, c.grid_ny);
  const MaternParams kernel{sc.range, c.sigma, c.nu};

  Dataset d;
  d.sim = {c.eta, c.tau, c.alpha, kernel};
  d.truth = sample_field(grid, kernel, derive_seed(master_seed, sc, "field"));
  const FieldRealization& truth = *d.truth;

  const int n_pref = preferential_count(sc.n_total, sc.prop_random);
  const int n_rand = sc.n_total - n_pref;
  Locations locs = preferential_points(n_pref, truth, c.alpha, derive_seed(master_seed, sc, "pref"));
  const Locations random_locs = uniform_points(n_rand, grid, derive_seed(master_seed, sc, "random"));
  locs.insert(locs.end(), random_locs.begin(), random_locs.end());

  const auto marks = generate_marks(locs, truth, c.eta, c.tau, derive_seed(master_seed, sc, "marks"));
  d.train.reserve(locs.size());
  for (std::size_t i = 0; i < locs.size(); ++i) {
    d.train.push_back({locs[i], marks[i], static_cast<int>(i) < n_pref ? 1 : 0});
  }

  auto key = [](Point p) { return std::pair{p.x, p.y}; };
  std::set<std::pair<double, double>> taken;
  for (const auto& p : locs) taken.insert(key(p));
  RngStream rng(derive_seed(master_seed, sc, "test"));
  d.test.reserve(static_cast<std::size_t>(c.n_test));
  while (static_cast<int>(d.test.size()) < c.n_test) {
    const Point s = draw_uniform(rng, grid.domain());
    if (taken.contains(key(s))) continue;
    d.test.push_back({s, c.eta + interpolate(truth, s)});
  }
  return d;
}

}  // namespace prefsdm
