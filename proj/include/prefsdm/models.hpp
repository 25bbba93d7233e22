#pragma once

#include "prefsdm/samplers.hpp"
#include "prefsdm/spatial_field.hpp"

#include <Eigen/Core>

#include <string_view>
#include <vector>

namespace prefsdm {

// Point-process layer of the joint model. All three share the Gaussian mark
// layer y ~ N(eta + u(s), tau^2).
//   Geo:  log lambda = beta
//   Pref: log lambda = eta_star + alpha * u
//   Mix:  log lambda = a * (eta_star + alpha * u) + (1 - a) * beta
enum class ModelKind { Geo, Pref, Mix };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
inline constexpr ModelKind kAllModels[] = {ModelKind::Geo, ModelKind::Pref, ModelKind::Mix};

struct HyperParams {
  double eta = 0.0;
  double eta_star = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  double log_range = -0.6931471805599453;  // log 0.5
  double log_sigma = 0.0;
  double log_tau = -1.2039728043259361;  // log 0.3

  double range() const;
  double sigma() const;
  double tau() const;
  MaternParams kernel(double nu) const { return {range(), sigma(), nu}; }
  bool finite() const;
};

// Normal(0, fixed_sd^2) on the intercepts and alpha; Normal(log center,
// log_sd^2) on the log kernel and noise scales.
struct Priors {
  double fixed_sd = 10.0;
  double log_sd = 1.0;
  double range_center = 0.3535533905932738;  // a quarter of the unit-square diagonal
  double sigma_center = 1.0;
  double tau_center = 0.3;

  static Priors for_domain(const Rect& domain);
};

struct CellCounts {
  std::vector<int> counts;
  double exposure = 0.0;

  int total() const;
};

CellCounts cell_counts(const Locations& locs, const GridSpec& grid);

struct PosteriorTerms {
  double marks = 0.0;
  double point_process = 0.0;
  double field = 0.0;
  double hyper = 0.0;

  double total() const { return marks + point_process + field + hyper; }
};

class ConditionalPosterior;

// Negative log joint density of one model kind bound to training data and a
// grid. A point-process layer only exists when it has data: under Mix, the
// LGCP layer is dropped when no a=1 points are present and the homogeneous
// layer when no a=0 points are present, together with their hyperpriors.
class JointModel {
 public:
  JointModel(ModelKind kind, std::vector<Observation> train, const GridSpec& grid,
             Priors priors = {}, double nu = 1.0);

  ModelKind kind() const { return kind_; }
  const GridSpec& grid() const { return grid_; }
  const Priors& priors() const { return priors_; }
  double nu() const { return nu_; }
  int n_latent() const { return grid_.size(); }
  int n_obs() const { return static_cast<int>(train_.size()); }
  const std::vector<Observation>& train() const { return train_; }
  const std::vector<Stencil>& stencils() const { return stencils_; }

  bool has_lgcp_layer() const { return has_lgcp_; }
  bool has_homogeneous_layer() const { return has_homogeneous_; }
  const CellCounts& lgcp_counts() const { return lgcp_counts_; }
  int lgcp_points() const { return lgcp_counts_.total(); }
  int homogeneous_points() const { return homogeneous_points_; }

  double nl_marks(const HyperParams& h, const Eigen::VectorXd& u) const;
  double nl_lgcp(const HyperParams& h, const Eigen::VectorXd& u) const;
  double nl_homogeneous(double beta) const;
  double nl_point_process(const HyperParams& h, const Eigen::VectorXd& u) const;
  double nl_hyper(const HyperParams& h) const;

  // Exact maximizer over beta of the evidence; beta enters only through the
  // homogeneous layer and its prior, which are separable from everything else.
  double profile_beta() const;

  ConditionalPosterior condition(const HyperParams& h) const;

 private:
  ModelKind kind_;
  std::vector<Observation> train_;
  GridSpec grid_;
  Priors priors_;
  double nu_;
  std::vector<Stencil> stencils_;
  bool has_lgcp_ = false;
  bool has_homogeneous_ = false;
  CellCounts lgcp_counts_;
  std::vector<std::array<int, 4>> corners_;
  int homogeneous_points_ = 0;
};

// The posterior in u for fixed hyperparameters; holds the factorized prior
// covariance. Must not outlive the JointModel it came from.
class ConditionalPosterior {
 public:
  ConditionalPosterior(const JointModel& model, const HyperParams& h);

  const HyperParams& hyper() const { return h_; }
  const JointModel& model() const { return *model_; }
  const Eigen::MatrixXd& prior_precision() const { return precision_; }
  double prior_log_det() const { return log_det_; }
  double prior_jitter() const { return jitter_; }

  PosteriorTerms terms(const Eigen::VectorXd& u) const;
  double value(const Eigen::VectorXd& u) const { return terms(u).total(); }
  double nl_field(const Eigen::VectorXd& u) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const;
  // Gradient of the point-process term alone.
  Eigen::VectorXd point_process_gradient(const Eigen::VectorXd& u) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& u) const;

 private:
  void check(const Eigen::VectorXd& u) const;

  const JointModel* model_;
  HyperParams h_;
  Eigen::MatrixXd precision_;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
};

// Free-function forms with default priors.
double neg_log_posterior(ModelKind m, const HyperParams& h, const Eigen::VectorXd& u,
                         const Dataset& d, const GridSpec& grid);
Eigen::VectorXd nlp_grad_u(ModelKind m, const HyperParams& h, const Eigen::VectorXd& u,
                           const Dataset& d, const GridSpec& grid);
Eigen::MatrixXd nlp_hess_u(ModelKind m, const HyperParams& h, const Eigen::VectorXd& u,
                           const Dataset& d, const GridSpec& grid);

}  // namespace prefsdm
