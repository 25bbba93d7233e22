#include <doctest.h>

#include "prefsdm/error.hpp"
#include "prefsdm/inference.hpp"
#include "prefsdm/rng.hpp"
#include "support.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

using namespace prefsdm;

namespace {

HyperParams base_hyper() {
  HyperParams h;
  h.eta = 0.2;
  h.eta_star = 3.0;
  h.beta = 3.5;
  h.alpha = 0.7;
  h.log_range = std::log(0.4);
  h.log_sigma = std::log(0.8);
  h.log_tau = std::log(0.35);
  return h;
}

bool rel_close(const Eigen::VectorXd& got, const Eigen::VectorXd& want, double tol = 1e-8) {
  return (got - want).norm() <= tol * std::max(want.norm(), 1e-300);
}

Dataset small_dataset(int n, std::uint64_t seed) {
  RngStream rng(seed);
  return oracle::dataset_from(oracle::random_observations(n, rng));
}

}  // namespace

TEST_CASE("Geo mode equals the closed-form Gaussian posterior mean") {
  for (int side : {3, 5, 7}) {
    const GridSpec g(side, side);
    const Dataset d = small_dataset(12, 100 + side);
    const HyperParams h = base_hyper();
    const ModeResult mode = find_mode(ModelKind::Geo, h, d, g, Eigen::VectorXd::Zero(g.size()));
    CHECK(mode.converged);

    const double tau2 = std::exp(2 * h.log_tau);
    const Eigen::MatrixXd a = oracle::projection(side, side, d.train);
    const Eigen::MatrixXd sigma = oracle::hand_cov(side, side, {std::exp(h.log_range), std::exp(h.log_sigma), 1.0});
    Eigen::VectorXd y(d.train.size());
    for (std::size_t i = 0; i < d.train.size(); ++i) y[i] = d.train[i].y - h.eta;
    const Eigen::MatrixXd prec = sigma.inverse() + a.transpose() * a / tau2;
    const Eigen::VectorXd expected = prec.ldlt().solve(a.transpose() * y / tau2);
    CHECK(rel_close(mode.u, expected));
  }
}

TEST_CASE("find_mode started at the mode does not move") {
  const GridSpec g(8, 8);
  const Dataset d = small_dataset(40, 7);
  const HyperParams h = base_hyper();
  const ModeResult first = find_mode(ModelKind::Pref, h, d, g, Eigen::VectorXd::Zero(g.size()));
  REQUIRE(first.converged);
  CHECK(first.grad_norm < 1e-6);
  CHECK(nlp_grad_u(ModelKind::Pref, h, first.u, d, g).cwiseAbs().maxCoeff() < 1e-6);
  const ModeResult again = find_mode(ModelKind::Pref, h, d, g, first.u);
  CHECK(again.iterations <= 1);
  CHECK((again.u - first.u).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Newton objective trace is nonincreasing on a Pref fit") {
  const GridSpec g(8, 8);
  const Dataset d = small_dataset(50, 8);
  HyperParams h = base_hyper();
  h.alpha = 2.0;
  const ModeResult mode = find_mode(ModelKind::Pref, h, d, g, Eigen::VectorXd::Constant(g.size(), 1.5));
  REQUIRE(mode.trace.size() >= 2);
  for (std::size_t k = 1; k < mode.trace.size(); ++k) CHECK(mode.trace[k] <= mode.trace[k - 1]);
  CHECK(mode.converged);
}

TEST_CASE("Laplace evidence of a one-dimensional Gaussian integral is exact") {
  const double s = 0.8, tau = 0.3, y = 0.65;
  SmoothObjective f;
  f.value = [&](const Eigen::VectorXd& u) {
    return oracle::neg_log_normal(u[0], 0.0, s) + oracle::neg_log_normal(y, u[0], tau);
  };
  f.gradient = [&](const Eigen::VectorXd& u) {
    return Eigen::VectorXd::Constant(1, u[0] / (s * s) - (y - u[0]) / (tau * tau));
  };
  f.hessian = [&](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Constant(1, 1, 1 / (s * s) + 1 / (tau * tau));
  };
  const ModeResult mode = newton_mode(f, Eigen::VectorXd::Zero(1));
  const double exact = -oracle::neg_log_normal(y, 0.0, std::sqrt(s * s + tau * tau));
  CHECK(laplace_log_evidence(mode) == doctest::Approx(exact).epsilon(1e-10));
}

TEST_CASE("Geo Laplace evidence equals the conjugate Gaussian marginal") {
  for (int side : {2, 3, 4}) {
    CAPTURE(side);
    const GridSpec g(side, side);
    const Dataset d = small_dataset(5 + side, 300 + side);
    const HyperParams h = base_hyper();
    const int n = static_cast<int>(d.train.size());

    const double tau2 = std::exp(2 * h.log_tau);
    const Eigen::MatrixXd a = oracle::projection(side, side, d.train);
    const Eigen::MatrixXd sigma = oracle::hand_cov(side, side, {std::exp(h.log_range), std::exp(h.log_sigma), 1.0});
    const Eigen::MatrixXd cov = a * sigma * a.transpose() + tau2 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r[i] = d.train[i].y - h.eta;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    const double log_det = ldlt.vectorD().array().log().sum();
    const double log_marks = -0.5 * r.dot(ldlt.solve(r)) - 0.5 * log_det - 0.5 * n * std::log(2 * oracle::kPi);
    const double homog = -n * h.beta + std::exp(h.beta) * 1.0;
    const double expected = log_marks - homog - oracle::hyper_prior(h, false, true);

    CHECK(laplace_log_evidence(ModelKind::Geo, h, d, g) == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("Pref with alpha = 0 differs from Geo only by the intensity layers") {
  const GridSpec g(6, 6);
  const Dataset d = small_dataset(30, 5);
  HyperParams h = base_hyper();
  h.alpha = 0.0;
  const int n = static_cast<int>(d.train.size());
  const double area = 1.0;
  const double lgcp = -n * h.eta_star + std::exp(h.eta_star) * area;
  const double homog = -n * h.beta + std::exp(h.beta) * area;
  const double diff = (homog + oracle::neg_log_normal(h.beta, 0, 10)) -
                      (lgcp + oracle::neg_log_normal(h.eta_star, 0, 10) + oracle::neg_log_normal(0.0, 0, 10));
  const double pref = laplace_log_evidence(ModelKind::Pref, h, d, g);
  const double geo = laplace_log_evidence(ModelKind::Geo, h, d, g);
  CHECK(pref == doctest::Approx(geo + diff).epsilon(1e-10));
}

TEST_CASE("Nelder-Mead minimizes a shifted quadratic") {
  auto f = [](const Eigen::VectorXd& x) {
    return (x[0] - 1.0) * (x[0] - 1.0) + 3.0 * (x[1] + 2.0) * (x[1] + 2.0) + 0.5 * x[0] * x[1];
  };
  const auto r = nelder_mead(f, Eigen::Vector2d(0, 0), 0.5, 1e-8, 2000);
  CHECK(r.converged);
  // Stationary point of the quadratic.
  Eigen::Matrix2d hmat;
  hmat << 2.0, 0.5, 0.5, 6.0;
  const Eigen::Vector2d xstar = hmat.ldlt().solve(Eigen::Vector2d(2.0, -12.0));
  CHECK(r.x[0] == doctest::Approx(xstar[0]).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(xstar[1]).epsilon(1e-5));
  const auto capped = nelder_mead(f, Eigen::Vector2d(0, 0), 0.5, 1e-12, 10);
  CHECK_FALSE(capped.converged);
  CHECK(capped.evaluations >= 10);
  CHECK(capped.evaluations <= 10 + 3);
}

TEST_CASE("fit is reproducible and rejects empty data") {
  ScenarioSpec sc;
  sc.range = 0.4;
  sc.prop_random = 0.5;
  sc.n_total = 40;
  sc.sim.grid_nx = sc.sim.grid_ny = 6;
  sc.sim.n_test = 10;
  const Dataset d = make_dataset(sc, 3);
  const GridSpec g(6, 6);
  InferenceConfig cfg;
  cfg.starts = 2;
  cfg.max_evals = 150;
  for (ModelKind m : kAllModels) {
    const FitResult a = fit(m, d, g, cfg, 11);
    const FitResult b = fit(m, d, g, cfg, 11);
    CHECK(a.log_evidence == b.log_evidence);
    CHECK(a.u_mode == b.u_mode);
    CHECK(a.hyper_hat.eta == b.hyper_hat.eta);
    CHECK(a.hyper_hat.alpha == b.hyper_hat.alpha);
    CHECK(a.hyper_hat.log_range == b.hyper_hat.log_range);
    CHECK(a.outer_evaluations == b.outer_evaluations);
    CHECK(std::isfinite(a.log_evidence));
    if (m == ModelKind::Geo) CHECK(a.hyper_hat.alpha == 0.0);
  }
  CHECK(active_hyper_names(JointModel(ModelKind::Pref, d.train, g)).size() == 6);
  CHECK(active_hyper_names(JointModel(ModelKind::Geo, d.train, g)).size() == 4);

  // Observation order does not matter.
  Dataset shuffled = d;
  std::reverse(shuffled.train.begin(), shuffled.train.end());
  CHECK(fit(ModelKind::Pref, shuffled, g, cfg, 11).log_evidence == fit(ModelKind::Pref, d, g, cfg, 11).log_evidence);

  Dataset empty = d;
  empty.train.clear();
  try {
    fit(ModelKind::Geo, empty, g, cfg, 1);
    FAIL("expected an input error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_argument);
  }
}

TEST_CASE("predict interpolates noise-free data") {
  const GridSpec g(10, 10);
  const std::vector<Observation> obs = {
      {{0.13, 0.21}, 0.9, 0}, {{0.71, 0.34}, -0.4, 0}, {{0.45, 0.82}, 0.3, 0}, {{0.88, 0.9}, 1.2, 0},
      {{0.3, 0.55}, -0.8, 0}};
  const Dataset d = oracle::dataset_from(obs);
  HyperParams h = base_hyper();
  h.log_tau = std::log(1e-6);
  const FitResult f = condition_at(ModelKind::Geo, h, d, g);
  Locations where;
  for (const auto& o : obs) where.push_back(o.location);
  const Predictive p = predict(f, where);
  REQUIRE(p.mean.size() == 5);
  REQUIRE(p.sd.size() == 5);
  for (std::size_t i = 0; i < obs.size(); ++i) CHECK(std::abs(p.mean[i] - obs[i].y) < 1e-3);
  CHECK(predict(f, {}).mean.size() == 0);
}

TEST_CASE("predictive variance reverts to the prior far from data") {
  const GridSpec g(16, 16);
  std::vector<Observation> obs;
  RngStream rng(31);
  for (int i = 0; i < 20; ++i) obs.push_back({{0.15 * rng.uniform(), 0.15 * rng.uniform()}, rng.normal(), 0});
  HyperParams h = base_hyper();
  h.log_range = std::log(0.1);
  h.log_sigma = std::log(1.3);
  const FitResult f = condition_at(ModelKind::Geo, h, oracle::dataset_from(obs), g);
  // A grid node, so no interpolation shrinks the variance.
  const Predictive p = predict(f, {{14.0 / 15.0, 13.0 / 15.0}});
  const double s2 = std::exp(2 * h.log_sigma);
  CHECK(std::abs(p.sd[0] * p.sd[0] - s2) < 0.10 * s2);
}

TEST_CASE("posterior draws") {
  const GridSpec g(6, 6);
  const Dataset d = small_dataset(25, 41);
  const FitResult f = condition_at(ModelKind::Pref, base_hyper(), d, g);
  const int n = 5000;
  const Eigen::MatrixXd draws = posterior_functional_draws(f, n, 5);
  REQUIRE(draws.rows() == n);
  REQUIRE(draws.cols() == g.size());
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  for (int i = 0; i < g.size(); ++i) {
    const double sd = std::sqrt(centered.col(i).squaredNorm() / (n - 1));
    CHECK(std::abs(mean[i] - f.u_mode[i]) < 4.0 * sd / std::sqrt(double(n)));
  }
  // Draw covariance tracks the inverse Hessian.
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
  const Eigen::MatrixXd hinv = f.hess_mode.llt.solve(Eigen::MatrixXd::Identity(g.size(), g.size()));
  CHECK((cov - hinv).norm() / hinv.norm() < 0.1);

  CHECK(posterior_functional_draws(f, 1, 5).rows() == 1);
  CHECK(posterior_functional_draws(f, 20, 8) == posterior_functional_draws(f, 20, 8));
  CHECK(posterior_functional_draws(f, 20, 8) != posterior_functional_draws(f, 20, 9));
  CHECK_THROWS_AS(posterior_functional_draws(f, 0, 8), Error);
}
