#pragma once

#include "prefsdm/models.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace prefsdm {

struct NewtonOptions {
  double grad_tol = 1e-6;
  int max_iter = 100;
};

// Any twice-differentiable objective the Laplace machinery can act on.
struct SmoothObjective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
};

struct ModeResult {
  Eigen::VectorXd u;
  JitteredCholesky hessian;  // factorization at u
  double objective = 0.0;
  double grad_norm = 0.0;  // max-norm at u
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective at the start and after each accepted step
};

// Damped Newton with Armijo backtracking. Stops when the gradient max-norm
// drops below grad_tol or after max_iter steps; hitting the cap leaves
// converged = false rather than throwing.
ModeResult newton_mode(const SmoothObjective& f, Eigen::VectorXd u0, const NewtonOptions& opts = {});

// -f(u*) + (n/2) log(2 pi) - (1/2) log det H(u*).
double laplace_log_evidence(const ModeResult& mode);

ModeResult find_mode(const ConditionalPosterior& post, const Eigen::VectorXd& u0,
                     const NewtonOptions& opts = {});
ModeResult find_mode(ModelKind m, const HyperParams& h, const Dataset& d, const GridSpec& grid,
                     const Eigen::VectorXd& u0);
double laplace_log_evidence(ModelKind m, const HyperParams& h, const Dataset& d, const GridSpec& grid);

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Minimizes f from x0 with an axis-aligned initial simplex of the given step.
// Converged when every vertex lies within tol (max-norm) of the best vertex.
// The budget is checked once per iteration, so the count can exceed max_evals
// by at most n + 1.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double step, double tol, int max_evals);

struct InferenceConfig {
  int starts = 3;
  int max_evals = 500;  // per start
  double outer_tol = 1e-4;
  double initial_step = 0.5;
  double start_jitter = 0.5;
  double nu = 1.0;
  NewtonOptions newton;
  std::optional<Priors> priors;  // unset: Priors::for_domain(grid)
};

struct FitResult {
  ModelKind model = ModelKind::Geo;
  GridSpec grid{2, 2};
  double nu = 1.0;
  HyperParams hyper_hat;
  Eigen::VectorXd u_mode;
  JitteredCholesky hess_mode;
  double log_evidence = 0.0;
  int outer_evaluations = 0;
  int inner_iterations = 0;
  int best_start = 0;
  bool outer_converged = false;
  bool inner_converged = false;
  bool converged = false;
};

// Names of the hyperparameters searched by the outer optimizer, in vector order.
std::vector<const char*> active_hyper_names(const JointModel& model);

// Laplace approximation at fixed hyperparameters (no outer search).
FitResult condition_at(ModelKind m, const HyperParams& h, const Dataset& d, const GridSpec& grid,
                       const InferenceConfig& cfg = {});

// Empirical-Bayes fit: multi-start Nelder-Mead over the active transformed
// hyperparameters maximizing the Laplace log evidence. Observation order does
// not affect the result.
FitResult fit(ModelKind m, const Dataset& d, const GridSpec& grid, const InferenceConfig& cfg,
              std::uint64_t seed);

struct Predictive {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

// Plug-in Gaussian predictive of the noise-free surface eta + u(s).
Predictive predict(const FitResult& fit, const Locations& points);

// Rows are draws of the latent field u ~ N(u_mode, H^-1).
Eigen::MatrixXd posterior_functional_draws(const FitResult& fit, int n_draws, std::uint64_t seed);

}  // namespace prefsdm
