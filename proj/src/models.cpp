#include "prefsdm/models.hpp"

#include "prefsdm/error.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace prefsdm {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double neg_log_normal(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return 0.5 * z * z + std::log(sd) + kHalfLog2Pi;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Geo: return "geo";
    case ModelKind::Pref: return "pref";
    case ModelKind::Mix: return "mix";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "geo" || name == "Geo") return ModelKind::Geo;
  if (name == "pref" || name == "Pref") return ModelKind::Pref;
  if (name == "mix" || name == "Mix") return ModelKind::Mix;
  fail(Errc::invalid_argument, "unknown model kind '" + std::string(name) + "'");
}

double HyperParams::range() const { return std::exp(log_range); }
double HyperParams::sigma() const { return std::exp(log_sigma); }
double HyperParams::tau() const { return std::exp(log_tau); }

bool HyperParams::finite() const {
  for (double v : {eta, eta_star, beta, alpha, log_range, log_sigma, log_tau}) {
    if (!std::isfinite(v)) return false;
  }
  return std::isfinite(range()) && range() > 0 && std::isfinite(sigma()) && sigma() > 0 &&
         std::isfinite(tau()) && tau() > 0;
}

Priors Priors::for_domain(const Rect& domain) {
  Priors p;
  p.range_center = 0.25 * domain.diameter();
  return p;
}

int CellCounts::total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

CellCounts cell_counts(const Locations& locs, const GridSpec& grid) {
  CellCounts out;
  out.counts.assign(static_cast<std::size_t>(grid.n_cells()), 0);
  out.exposure = grid.cell_area();
  for (const auto& p : locs) {
    const auto [ci, cj] = grid.cell_of(p);
    ++out.counts[static_cast<std::size_t>(cj * grid.cells_x() + ci)];
  }
  return out;
}

// ---------------------------------------------------------------------------

JointModel::JointModel(ModelKind kind, std::vector<Observation> train, const GridSpec& grid,
                       Priors priors, double nu)
    : kind_(kind), train_(std::move(train)), grid_(grid), priors_(priors), nu_(nu) {
  stencils_.reserve(train_.size());
  Locations lgcp_locs;
  for (const auto& o : train_) {
    if (o.a != 0 && o.a != 1) fail(Errc::invalid_argument, "sampling indicator must be 0 or 1");
    stencils_.push_back(bilinear_stencil(grid_, o.location));
    const bool to_lgcp = kind_ == ModelKind::Pref || (kind_ == ModelKind::Mix && o.a == 1);
    if (to_lgcp) {
      lgcp_locs.push_back(o.location);
    } else if (kind_ != ModelKind::Pref) {
      ++homogeneous_points_;
    }
  }
  switch (kind_) {
    case ModelKind::Geo:
      has_homogeneous_ = true;
      break;
    case ModelKind::Pref:
      has_lgcp_ = true;
      break;
    case ModelKind::Mix:
      has_lgcp_ = !lgcp_locs.empty();
      has_homogeneous_ = homogeneous_points_ > 0;
      break;
  }
  lgcp_counts_ = cell_counts(lgcp_locs, grid_);
  corners_.reserve(static_cast<std::size_t>(grid_.n_cells()));
  for (int cj = 0; cj < grid_.cells_y(); ++cj) {
    for (int ci = 0; ci < grid_.cells_x(); ++ci) corners_.push_back(grid_.cell_corners(ci, cj));
  }
}

double JointModel::nl_marks(const HyperParams& h, const Eigen::VectorXd& u) const {
  const double tau = h.tau();
  const double inv_var = 1.0 / (tau * tau);
  const double norm = std::log(tau) + kHalfLog2Pi;
  double acc = 0.0;
  for (std::size_t i = 0; i < train_.size(); ++i) {
    const double r = train_[i].y - h.eta - stencils_[i].apply(u);
    acc += 0.5 * r * r * inv_var + norm;
  }
  return acc;
}

double JointModel::nl_lgcp(const HyperParams& h, const Eigen::VectorXd& u) const {
  const double area = lgcp_counts_.exposure;
  double acc = 0.0;
  for (std::size_t k = 0; k < corners_.size(); ++k) {
    const auto& c = corners_[k];
    const double ubar = 0.25 * (u[c[0]] + u[c[1]] + u[c[2]] + u[c[3]]);
    const double lin = h.eta_star + h.alpha * ubar;
    acc += -lgcp_counts_.counts[k] * lin + std::exp(lin) * area;
  }
  return acc;
}

double JointModel::nl_homogeneous(double beta) const {
  return -homogeneous_points_ * beta + std::exp(beta) * grid_.domain().area();
}

double JointModel::nl_point_process(const HyperParams& h, const Eigen::VectorXd& u) const {
  double acc = 0.0;
  if (has_lgcp_) acc += nl_lgcp(h, u);
  if (has_homogeneous_) acc += nl_homogeneous(h.beta);
  return acc;
}

double JointModel::nl_hyper(const HyperParams& h) const {
  const Priors& p = priors_;
  double acc = neg_log_normal(h.eta, 0.0, p.fixed_sd);
  if (has_lgcp_) {
    acc += neg_log_normal(h.eta_star, 0.0, p.fixed_sd);
    acc += neg_log_normal(h.alpha, 0.0, p.fixed_sd);
  }
  if (has_homogeneous_) acc += neg_log_normal(h.beta, 0.0, p.fixed_sd);
  acc += neg_log_normal(h.log_range, std::log(p.range_center), p.log_sd);
  acc += neg_log_normal(h.log_sigma, std::log(p.sigma_center), p.log_sd);
  acc += neg_log_normal(h.log_tau, std::log(p.tau_center), p.log_sd);
  return acc;
}

double JointModel::profile_beta() const {
  if (!has_homogeneous_) return 0.0;
  // Root of n0 - exp(beta) |D| - beta / s^2, strictly decreasing in beta.
  const double area = grid_.domain().area();
  const double prec = 1.0 / (priors_.fixed_sd * priors_.fixed_sd);
  double beta = std::log(std::max(homogeneous_points_, 1) / area);
  for (int it = 0; it < 100; ++it) {
    const double g = homogeneous_points_ - std::exp(beta) * area - beta * prec;
    const double step = g / (std::exp(beta) * area + prec);
    beta += step;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(beta))) break;
  }
  return beta;
}

ConditionalPosterior JointModel::condition(const HyperParams& h) const {
  return ConditionalPosterior(*this, h);
}

// ---------------------------------------------------------------------------

ConditionalPosterior::ConditionalPosterior(const JointModel& model, const HyperParams& h)
    : model_(&model), h_(h) {
  if (!h.finite()) fail(Errc::numeric, "hyperparameters are not finite");
  const MaternParams kernel = h.kernel(model.nu());
  auto chol = cholesky_with_jitter(build_cov_matrix(model.grid(), kernel), kernel.sigma * kernel.sigma);
  jitter_ = chol.jitter;
  log_det_ = chol.log_det();
  const int n = model.n_latent();
  precision_ = chol.llt.solve(Eigen::MatrixXd::Identity(n, n));
  // Exact symmetry keeps the assembled Hessian symmetric bit-for-bit.
  precision_ = 0.5 * (precision_ + precision_.transpose()).eval();
}

void ConditionalPosterior::check(const Eigen::VectorXd& u) const {
  if (u.size() != model_->n_latent()) {
    fail(Errc::invalid_argument, "latent vector length " + std::to_string(u.size()) +
                                     " does not match grid size " +
                                     std::to_string(model_->n_latent()));
  }
}

double ConditionalPosterior::nl_field(const Eigen::VectorXd& u) const {
  const double quad = u.dot(precision_ * u);
  return 0.5 * quad + 0.5 * log_det_ + model_->n_latent() * kHalfLog2Pi;
}

PosteriorTerms ConditionalPosterior::terms(const Eigen::VectorXd& u) const {
  check(u);
  PosteriorTerms t;
  t.marks = model_->nl_marks(h_, u);
  t.point_process = model_->nl_point_process(h_, u);
  t.field = nl_field(u);
  t.hyper = model_->nl_hyper(h_);
  if (!std::isfinite(t.total())) fail(Errc::numeric, "negative log posterior is not finite");
  return t;
}

Eigen::VectorXd ConditionalPosterior::point_process_gradient(const Eigen::VectorXd& u) const {
  check(u);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
  if (!model_->has_lgcp_layer()) return g;
  const GridSpec& grid = model_->grid();
  const auto& counts = model_->lgcp_counts();
  const double area = counts.exposure;
  std::size_t k = 0;
  for (int cj = 0; cj < grid.cells_y(); ++cj) {
    for (int ci = 0; ci < grid.cells_x(); ++ci, ++k) {
      const auto c = grid.cell_corners(ci, cj);
      const double ubar = 0.25 * (u[c[0]] + u[c[1]] + u[c[2]] + u[c[3]]);
      const double mu = std::exp(h_.eta_star + h_.alpha * ubar) * area;
      const double d = 0.25 * h_.alpha * (mu - counts.counts[k]);
      for (int v : c) g[v] += d;
    }
  }
  return g;
}

Eigen::VectorXd ConditionalPosterior::gradient(const Eigen::VectorXd& u) const {
  check(u);
  Eigen::VectorXd g = precision_ * u;
  const double inv_var = 1.0 / (h_.tau() * h_.tau());
  const auto& st = model_->stencils();
  const auto& train = model_->train();
  for (std::size_t i = 0; i < train.size(); ++i) {
    const double r = train[i].y - h_.eta - st[i].apply(u);
    for (int c = 0; c < 4; ++c) g[st[i].node[c]] -= r * inv_var * st[i].weight[c];
  }
  g += point_process_gradient(u);
  return g;
}

Eigen::MatrixXd ConditionalPosterior::hessian(const Eigen::VectorXd& u) const {
  check(u);
  Eigen::MatrixXd hess = precision_;
  const double inv_var = 1.0 / (h_.tau() * h_.tau());
  for (const auto& st : model_->stencils()) {
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        hess(st.node[a], st.node[b]) += st.weight[a] * st.weight[b] * inv_var;
      }
    }
  }
  if (model_->has_lgcp_layer()) {
    const GridSpec& grid = model_->grid();
    const double area = model_->lgcp_counts().exposure;
    for (int cj = 0; cj < grid.cells_y(); ++cj) {
      for (int ci = 0; ci < grid.cells_x(); ++ci) {
        const auto c = grid.cell_corners(ci, cj);
        const double ubar = 0.25 * (u[c[0]] + u[c[1]] + u[c[2]] + u[c[3]]);
        const double mu = std::exp(h_.eta_star + h_.alpha * ubar) * area;
        const double w = h_.alpha * h_.alpha * mu / 16.0;
        for (int a : c) {
          for (int b : c) hess(a, b) += w;
        }
      }
    }
  }
  return hess;
}

// ---------------------------------------------------------------------------

double neg_log_posterior(ModelKind m, const HyperParams& h, const Eigen::VectorXd& u,
                         const Dataset& d, const GridSpec& grid) {
  const JointModel model(m, d.train, grid, Priors::for_domain(grid.domain()));
  return model.condition(h).value(u);
}

Eigen::VectorXd nlp_grad_u(ModelKind m, const HyperParams& h, const Eigen::VectorXd& u,
                           const Dataset& d, const GridSpec& grid) {
  const JointModel model(m, d.train, grid, Priors::for_domain(grid.domain()));
  return model.condition(h).gradient(u);
}

Eigen::MatrixXd nlp_hess_u(ModelKind m, const HyperParams& h, const Eigen::VectorXd& u,
                           const Dataset& d, const GridSpec& grid) {
  const JointModel model(m, d.train, grid, Priors::for_domain(grid.domain()));
  return model.condition(h).hessian(u);
}

}  // namespace prefsdm
