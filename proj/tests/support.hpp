#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include "prefsdm/models.hpp"
#include "prefsdm/samplers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

inline double neg_log_normal(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return 0.5 * z * z + std::log(sd) + 0.5 * std::log(2.0 * kPi);
}

// Asymptotic Kolmogorov survival function Q(lambda).
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

inline KsResult two_sample_ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  const double n = double(a.size()) * b.size() / (a.size() + b.size());
  const double sn = std::sqrt(n);
  return {d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)};
}

inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto l, auto r) { return x[l] < x[r]; });
  std::vector<double> r(x.size());
  for (std::size_t k = 0; k < idx.size();) {
    std::size_t m = k;
    while (m + 1 < idx.size() && x[idx[m + 1]] == x[idx[k]]) ++m;
    for (std::size_t t = k; t <= m; ++t) r[idx[t]] = 0.5 * (k + m);
    k = m + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

// Bilinear interpolation on the unit square written out by hand.
inline double bilinear(int nx, int ny, const Eigen::VectorXd& v, double x, double y) {
  const double fx = x * (nx - 1), fy = y * (ny - 1);
  int i = std::min(static_cast<int>(fx), nx - 2);
  int j = std::min(static_cast<int>(fy), ny - 2);
  const double tx = fx - i, ty = fy - j;
  const double v00 = v[j * nx + i], v10 = v[j * nx + i + 1];
  const double v01 = v[(j + 1) * nx + i], v11 = v[(j + 1) * nx + i + 1];
  return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11;
}

// Observations with random locations, marks and indicators.
template <typename Rng>
std::vector<prefsdm::Observation> random_observations(int n, Rng& rng, double p_pref = 0.5) {
  std::vector<prefsdm::Observation> out;
  for (int i = 0; i < n; ++i) {
    prefsdm::Observation o;
    o.location = {rng.uniform(), rng.uniform()};
    o.y = 2.0 * rng.uniform() - 1.0;
    o.a = rng.uniform() < p_pref ? 1 : 0;
    out.push_back(o);
  }
  return out;
}

inline prefsdm::Dataset dataset_from(std::vector<prefsdm::Observation> train) {
  prefsdm::Dataset d;
  d.train = std::move(train);
  return d;
}

// Dense bilinear projection written out from the hand formula.
inline Eigen::MatrixXd projection(int nx, int ny, const std::vector<prefsdm::Observation>& obs) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(obs.size(), nx * ny);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    for (int i = 0; i < nx * ny; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Unit(nx * ny, i);
      a(k, i) = bilinear(nx, ny, e, obs[k].location.x, obs[k].location.y);
    }
  }
  return a;
}

inline Eigen::MatrixXd hand_cov(int nx, int ny, const prefsdm::MaternParams& p) {
  Eigen::MatrixXd c(nx * ny, nx * ny);
  for (int a = 0; a < nx * ny; ++a) {
    for (int b = 0; b < nx * ny; ++b) {
      const double dx = double(a % nx - b % nx) / (nx - 1), dy = double(a / nx - b / nx) / (ny - 1);
      c(a, b) = prefsdm::matern_cov(std::hypot(dx, dy), p);
    }
  }
  return c;
}

// Hyperprior negative log density with the default priors on the unit square.
inline double hyper_prior(const prefsdm::HyperParams& h, bool lgcp, bool homog) {
  double v = neg_log_normal(h.eta, 0, 10);
  if (lgcp) v += neg_log_normal(h.eta_star, 0, 10) + neg_log_normal(h.alpha, 0, 10);
  if (homog) v += neg_log_normal(h.beta, 0, 10);
  v += neg_log_normal(h.log_range, std::log(std::sqrt(2.0) / 4.0), 1.0);
  v += neg_log_normal(h.log_sigma, 0.0, 1.0);
  v += neg_log_normal(h.log_tau, std::log(0.3), 1.0);
  return v;
}

}  // namespace oracle
