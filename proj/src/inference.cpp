#include "prefsdm/inference.hpp"

#include "prefsdm/error.hpp"
#include "prefsdm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <tuple>

namespace prefsdm {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kInf = std::numeric_limits<double>::infinity();

double hessian_scale(const Eigen::MatrixXd& h) {
  return std::max(h.diagonal().cwiseAbs().mean(), 1e-300);
}

}  // namespace

ModeResult newton_mode(const SmoothObjective& f, Eigen::VectorXd u0, const NewtonOptions& opts) {
  if (!u0.allFinite()) fail(Errc::invalid_argument, "initial latent vector is not finite");
  ModeResult out;
  out.u = std::move(u0);
  out.objective = f.value(out.u);
  out.trace.push_back(out.objective);

  for (int it = 0;; ++it) {
    const Eigen::VectorXd g = f.gradient(out.u);
    out.grad_norm = g.cwiseAbs().maxCoeff();
    const Eigen::MatrixXd hess = f.hessian(out.u);
    out.hessian = cholesky_with_jitter(hess, hessian_scale(hess));
    if (out.grad_norm < opts.grad_tol) {
      out.converged = true;
      break;
    }
    if (it >= opts.max_iter) break;

    const Eigen::VectorXd step = -out.hessian.llt.solve(g);
    const double slope = g.dot(step);
    if (!(slope < 0.0)) break;

    bool accepted = false;
    double t = 1.0;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const Eigen::VectorXd trial = out.u + t * step;
      double ft = kInf;
      try {
        ft = f.value(trial);
      } catch (const Error&) {
        ft = kInf;
      }
      if (ft <= out.objective + 1e-4 * t * slope) {
        out.u = trial;
        out.objective = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    ++out.iterations;
    out.trace.push_back(out.objective);
  }
  return out;
}

double laplace_log_evidence(const ModeResult& mode) {
  return -mode.objective + 0.5 * static_cast<double>(mode.u.size()) * kLog2Pi -
         0.5 * mode.hessian.log_det();
}

ModeResult find_mode(const ConditionalPosterior& post, const Eigen::VectorXd& u0,
                     const NewtonOptions& opts) {
  SmoothObjective obj{
      [&post](const Eigen::VectorXd& u) { return post.value(u); },
      [&post](const Eigen::VectorXd& u) { return post.gradient(u); },
      [&post](const Eigen::VectorXd& u) { return post.hessian(u); },
  };
  return newton_mode(obj, u0, opts);
}

ModeResult find_mode(ModelKind m, const HyperParams& h, const Dataset& d, const GridSpec& grid,
                     const Eigen::VectorXd& u0) {
  const JointModel model(m, d.train, grid, Priors::for_domain(grid.domain()));
  return find_mode(model.condition(h), u0);
}

double laplace_log_evidence(ModelKind m, const HyperParams& h, const Dataset& d,
                            const GridSpec& grid) {
  const JointModel model(m, d.train, grid, Priors::for_domain(grid.domain()));
  const auto post = model.condition(h);
  return laplace_log_evidence(find_mode(post, Eigen::VectorXd::Zero(model.n_latent())));
}

// ---------------------------------------------------------------------------

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, double step, double tol, int max_evals) {
  const int n = static_cast<int>(x0.size());
  NelderMeadResult out;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++out.evaluations;
    const double v = f(x);
    return std::isnan(v) ? kInf : v;
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  vals[0] = eval(x0);
  for (int i = 0; i < n; ++i) {
    pts[i + 1][i] += step;
    vals[i + 1] = eval(pts[i + 1]);
  }

  std::vector<int> order(static_cast<std::size_t>(n + 1));
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    std::vector<Eigen::VectorXd> p2;
    std::vector<double> v2;
    for (int i : order) {
      p2.push_back(pts[i]);
      v2.push_back(vals[i]);
    }
    pts = std::move(p2);
    vals = std::move(v2);
  };
  auto diameter = [&] {
    double d = 0.0;
    for (int i = 1; i <= n; ++i) d = std::max(d, (pts[i] - pts[0]).cwiseAbs().maxCoeff());
    return d;
  };

  sort_simplex();
  while (true) {
    if (diameter() < tol && std::isfinite(vals[0])) {
      out.converged = true;
      break;
    }
    if (out.evaluations >= max_evals) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[i];
    centroid /= n;

    const Eigen::VectorXd xr = centroid + (centroid - pts[n]);
    const double fr = eval(xr);
    if (fr < vals[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[n]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[n] = xe;
        vals[n] = fe;
      } else {
        pts[n] = xr;
        vals[n] = fr;
      }
    } else if (fr < vals[n - 1]) {
      pts[n] = xr;
      vals[n] = fr;
    } else {
      const bool outside = fr < vals[n];
      const Eigen::VectorXd xc =
          outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                  : Eigen::VectorXd(centroid + 0.5 * (pts[n] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : vals[n])) {
        pts[n] = xc;
        vals[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          vals[i] = eval(pts[i]);
        }
      }
    }
    sort_simplex();
  }
  out.x = pts[0];
  out.value = vals[0];
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Observation> canonical_order(std::vector<Observation> train) {
  std::sort(train.begin(), train.end(), [](const Observation& a, const Observation& b) {
    return std::tie(a.location.x, a.location.y, a.y, a.a) <
           std::tie(b.location.x, b.location.y, b.y, b.a);
  });
  return train;
}

// Outer vector: [eta, log_range, log_sigma, log_tau] + [eta_star, alpha] when
// the LGCP layer is present. beta is profiled exactly.
HyperParams unpack(const Eigen::VectorXd& theta, const JointModel& model, double beta) {
  HyperParams h;
  h.eta = theta[0];
  h.log_range = theta[1];
  h.log_sigma = theta[2];
  h.log_tau = theta[3];
  if (model.has_lgcp_layer()) {
    h.eta_star = theta[4];
    h.alpha = theta[5];
  }
  h.beta = beta;
  return h;
}

Eigen::VectorXd initial_theta(const JointModel& model) {
  const auto& train = model.train();
  const double n = static_cast<double>(train.size());
  double mean = 0.0;
  for (const auto& o : train) mean += o.y;
  mean /= n;
  double ss = 0.0;
  for (const auto& o : train) ss += (o.y - mean) * (o.y - mean);
  double sd = train.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 1.0;
  if (!(sd > 1e-8)) sd = 1.0;

  const Rect& dom = model.grid().domain();
  Eigen::VectorXd theta(model.has_lgcp_layer() ? 6 : 4);
  theta[0] = mean;
  theta[1] = std::log(0.25 * dom.diameter());
  theta[2] = std::log(sd);
  theta[3] = std::log(0.5 * sd);
  if (model.has_lgcp_layer()) {
    theta[4] = std::log(std::max(model.lgcp_points(), 1) / dom.area());
    theta[5] = 0.0;
  }
  return theta;
}

FitResult finish(const JointModel& model, const HyperParams& h, const Eigen::VectorXd& u0,
                 const InferenceConfig& cfg) {
  const auto post = model.condition(h);
  ModeResult mode = find_mode(post, u0, cfg.newton);
  FitResult r;
  r.model = model.kind();
  r.grid = model.grid();
  r.nu = model.nu();
  r.hyper_hat = h;
  r.log_evidence = laplace_log_evidence(mode);
  r.inner_iterations = mode.iterations;
  r.inner_converged = mode.converged;
  r.u_mode = std::move(mode.u);
  r.hess_mode = std::move(mode.hessian);
  return r;
}

}  // namespace

std::vector<const char*> active_hyper_names(const JointModel& model) {
  std::vector<const char*> names{"eta", "log_range", "log_sigma", "log_tau"};
  if (model.has_lgcp_layer()) {
    names.push_back("eta_star");
    names.push_back("alpha");
  }
  return names;
}

FitResult condition_at(ModelKind m, const HyperParams& h, const Dataset& d, const GridSpec& grid,
                       const InferenceConfig& cfg) {
  const JointModel model(m, canonical_order(d.train), grid,
                         cfg.priors.value_or(Priors::for_domain(grid.domain())), cfg.nu);
  FitResult r = finish(model, h, Eigen::VectorXd::Zero(model.n_latent()), cfg);
  r.outer_converged = true;
  r.converged = r.inner_converged;
  return r;
}

FitResult fit(ModelKind m, const Dataset& d, const GridSpec& grid, const InferenceConfig& cfg,
              std::uint64_t seed) {
  if (d.train.empty()) fail(Errc::invalid_argument, "cannot fit an empty training set");
  if (cfg.starts < 1 || cfg.max_evals < 1) {
    fail(Errc::invalid_argument, "inference needs at least one start and one evaluation");
  }
  d.validate();
  const JointModel model(m, canonical_order(d.train), grid,
                         cfg.priors.value_or(Priors::for_domain(grid.domain())), cfg.nu);
  const double beta = model.profile_beta();
  const Eigen::VectorXd theta0 = initial_theta(model);

  Eigen::VectorXd warm = Eigen::VectorXd::Zero(model.n_latent());
  double best_value = kInf;
  Eigen::VectorXd best_u = warm;
  HyperParams best_h = unpack(theta0, model, beta);

  auto objective = [&](const Eigen::VectorXd& theta) {
    const HyperParams h = unpack(theta, model, beta);
    if (!h.finite()) return kInf;
    try {
      const auto post = model.condition(h);
      ModeResult mode = find_mode(post, warm, cfg.newton);
      const double value = -laplace_log_evidence(mode);
      if (!std::isfinite(value)) return kInf;
      warm = mode.u;
      if (value < best_value) {
        best_value = value;
        best_u = mode.u;
        best_h = h;
      }
      return value;
    } catch (const Error&) {
      return kInf;
    }
  };

  RngStream rng(seed);
  int total_evals = 0;
  int best_start = -1;
  bool best_converged = false;
  double best_start_value = kInf;
  for (int s = 0; s < cfg.starts; ++s) {
    Eigen::VectorXd x0 = theta0;
    if (s > 0) {
      for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] += cfg.start_jitter * rng.normal();
    }
    const auto nm = nelder_mead(objective, x0, cfg.initial_step, cfg.outer_tol, cfg.max_evals);
    total_evals += nm.evaluations;
    if (nm.value < best_start_value) {
      best_start_value = nm.value;
      best_start = s;
      best_converged = nm.converged;
    }
  }
  if (!std::isfinite(best_value)) {
    fail(Errc::numeric, "no finite Laplace evidence found for any start");
  }

  FitResult r = finish(model, best_h, best_u, cfg);
  r.outer_evaluations = total_evals;
  r.best_start = best_start;
  r.outer_converged = best_converged;
  r.converged = r.outer_converged && r.inner_converged;
  return r;
}

// ---------------------------------------------------------------------------

Predictive predict(const FitResult& fit, const Locations& points) {
  const int n = fit.grid.size();
  const int q = static_cast<int>(points.size());
  Predictive out;
  out.mean.resize(q);
  out.sd.resize(q);
  if (q == 0) return out;

  Eigen::MatrixXd proj_t = Eigen::MatrixXd::Zero(n, q);
  for (int k = 0; k < q; ++k) {
    const Stencil st = bilinear_stencil(fit.grid, points[static_cast<std::size_t>(k)]);
    for (int c = 0; c < 4; ++c) proj_t(st.node[c], k) += st.weight[c];
    out.mean[k] = fit.hyper_hat.eta + st.apply(fit.u_mode);
  }
  // var_k = p_k' H^-1 p_k = |L^-1 p_k|^2 with H = L L'.
  fit.hess_mode.llt.matrixL().solveInPlace(proj_t);
  out.sd = proj_t.colwise().squaredNorm().transpose().cwiseSqrt();
  return out;
}

Eigen::MatrixXd posterior_functional_draws(const FitResult& fit, int n_draws, std::uint64_t seed) {
  if (n_draws < 1) fail(Errc::invalid_argument, "need at least one posterior draw");
  if (fit.hess_mode.llt.info() != Eigen::Success || fit.hess_mode.llt.rows() != fit.u_mode.size()) {
    fail(Errc::factorization, "fit has no usable Hessian factorization");
  }
  const int n = static_cast<int>(fit.u_mode.size());
  const CounterRng rng(seed);
  Eigen::MatrixXd z(n, n_draws);
  for (int s = 0; s < n_draws; ++s) {
    for (int i = 0; i < n; ++i) {
      z(i, s) = rng.normal(static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(n) + i);
    }
  }
  // x = L'^-1 z has covariance (L L')^-1 = H^-1.
  fit.hess_mode.llt.matrixU().solveInPlace(z);
  z.colwise() += fit.u_mode;
  return z.transpose();
}

}  // namespace prefsdm
