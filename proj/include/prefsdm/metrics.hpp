#pragma once

#include "prefsdm/inference.hpp"
#include "prefsdm/samplers.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>

namespace prefsdm {

// Rows are posterior draws, columns training observations.
using LogLikMatrix = Eigen::MatrixXd;

struct WaicResult {
  double waic = 0.0;
  double p_eff = 0.0;
  double lppd = 0.0;
};

WaicResult waic(const LogLikMatrix& loglik);

double rmse(std::span<const double> pred, std::span<const double> truth);

// Cell quadrature of exp(eta + u) with corner-averaged u.
double abundance(const GridSpec& grid, const Eigen::VectorXd& u, double eta);

// Posterior mean of the abundance integral over latent draws (rows).
double posterior_abundance(const FitResult& fit, const Eigen::MatrixXd& draws);

// Gaussian mark log-likelihood of each observation under each draw.
LogLikMatrix mark_loglik_matrix(const FitResult& fit, const Eigen::MatrixXd& draws,
                                const std::vector<Observation>& train);

struct ScenarioResult {
  std::string scenario_id;
  double range = 0.0;
  double prop_random = 0.0;
  int n_total = 0;
  int replicate = 0;
  ModelKind model = ModelKind::Geo;
  bool ok = true;  // false when the fit failed; metrics are then meaningless
  std::string error;
  double waic = 0.0;
  double p_eff = 0.0;
  double rmse = 0.0;
  double abundance_est = 0.0;
  double abundance_true = 0.0;
  double abundance_ratio = 0.0;
  double log_evidence = 0.0;
  bool converged = false;
  int n_obs = 0;
  HyperParams hyper;
};

// WAIC, out-of-sample RMSE against d.test and the abundance ratio against the
// simulated truth, all from one set of functional draws.
ScenarioResult evaluate_fit(const FitResult& fit, const Dataset& d, int n_draws, std::uint64_t seed);

}  // namespace prefsdm
