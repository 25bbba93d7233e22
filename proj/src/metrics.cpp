#include "prefsdm/metrics.hpp"

#include "prefsdm/error.hpp"

#include <cmath>

namespace prefsdm {

WaicResult waic(const LogLikMatrix& loglik) {
  const auto draws = loglik.rows();
  if (draws < 2) fail(Errc::invalid_argument, "WAIC needs at least two posterior draws");
  if (!loglik.allFinite()) fail(Errc::numeric, "pointwise log-likelihood has non-finite entries");
  WaicResult r;
  for (Eigen::Index i = 0; i < loglik.cols(); ++i) {
    const auto col = loglik.col(i);
    const double top = col.maxCoeff();
    const double lse = top + std::log((col.array() - top).exp().sum());
    r.lppd += lse - std::log(static_cast<double>(draws));
    const double mean = col.mean();
    r.p_eff += (col.array() - mean).square().sum() / static_cast<double>(draws - 1);
  }
  r.waic = -2.0 * (r.lppd - r.p_eff);
  return r;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) fail(Errc::invalid_argument, "RMSE inputs differ in length");
  if (pred.empty()) fail(Errc::invalid_argument, "RMSE needs at least one value");
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

double abundance(const GridSpec& grid, const Eigen::VectorXd& u, double eta) {
  if (u.size() != grid.size()) fail(Errc::invalid_argument, "surface length does not match grid");
  double acc = 0.0;
  for (int cj = 0; cj < grid.cells_y(); ++cj) {
    for (int ci = 0; ci < grid.cells_x(); ++ci) {
      const auto c = grid.cell_corners(ci, cj);
      acc += std::exp(eta + 0.25 * (u[c[0]] + u[c[1]] + u[c[2]] + u[c[3]]));
    }
  }
  acc *= grid.cell_area();
  if (!std::isfinite(acc)) fail(Errc::numeric, "abundance integral is not finite");
  return acc;
}

double posterior_abundance(const FitResult& fit, const Eigen::MatrixXd& draws) {
  if (draws.rows() < 1) fail(Errc::invalid_argument, "no posterior draws");
  double acc = 0.0;
  for (Eigen::Index s = 0; s < draws.rows(); ++s) {
    acc += abundance(fit.grid, draws.row(s).transpose(), fit.hyper_hat.eta);
  }
  return acc / static_cast<double>(draws.rows());
}

LogLikMatrix mark_loglik_matrix(const FitResult& fit, const Eigen::MatrixXd& draws,
                                const std::vector<Observation>& train) {
  const double tau = fit.hyper_hat.tau();
  const double norm = -std::log(tau) - 0.5 * std::log(2.0 * M_PI);
  LogLikMatrix out(draws.rows(), static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Stencil st = bilinear_stencil(fit.grid, train[i].location);
    for (Eigen::Index s = 0; s < draws.rows(); ++s) {
      double u = 0.0;
      for (int c = 0; c < 4; ++c) u += st.weight[c] * draws(s, st.node[c]);
      const double r = (train[i].y - fit.hyper_hat.eta - u) / tau;
      out(s, static_cast<Eigen::Index>(i)) = norm - 0.5 * r * r;
    }
  }
  return out;
}

ScenarioResult evaluate_fit(const FitResult& fit, const Dataset& d, int n_draws, std::uint64_t seed) {
  ScenarioResult r;
  r.model = fit.model;
  r.converged = fit.converged;
  r.log_evidence = fit.log_evidence;
  r.n_obs = static_cast<int>(d.train.size());
  r.hyper = fit.hyper_hat;

  const Eigen::MatrixXd draws = posterior_functional_draws(fit, n_draws, seed);
  const WaicResult w = waic(mark_loglik_matrix(fit, draws, d.train));
  r.waic = w.waic;
  r.p_eff = w.p_eff;

  if (!d.test.empty()) {
    Locations pts;
    std::vector<double> truth;
    for (const auto& t : d.test) {
      pts.push_back(t.location);
      truth.push_back(t.truth);
    }
    const Predictive pred = predict(fit, pts);
    r.rmse = rmse(std::span<const double>(pred.mean.data(), pred.mean.size()), truth);
  }
  r.abundance_est = posterior_abundance(fit, draws);
  if (d.truth) {
    r.abundance_true = abundance(d.truth->grid, d.truth->values, d.sim.eta);
    r.abundance_ratio = r.abundance_est / r.abundance_true;
  }
  return r;
}

}  // namespace prefsdm
