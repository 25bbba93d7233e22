#include "prefsdm/spatial_field.hpp"

#include "prefsdm/error.hpp"
#include "prefsdm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace prefsdm {

double Rect::diameter() const { return std::hypot(width(), height()); }

GridSpec::GridSpec(int nx, int ny, Rect domain) : nx_(nx), ny_(ny), domain_(domain) {
  if (nx < 2 || ny < 2) {
    fail(Errc::invalid_argument, "grid needs at least 2 nodes per axis, got " +
                                     std::to_string(nx) + "x" + std::to_string(ny));
  }
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0) || !std::isfinite(domain.area())) {
    fail(Errc::invalid_argument, "grid domain must be a non-degenerate finite rectangle");
  }
}

double GridSpec::node_x(int i) const {
  return i == nx_ - 1 ? domain_.x1 : domain_.x0 + i * dx();
}

double GridSpec::node_y(int j) const {
  return j == ny_ - 1 ? domain_.y1 : domain_.y0 + j * dy();
}

namespace {

int locate(double v, double lo, double step, int n_cells, auto&& node) {
  int c = static_cast<int>(std::floor((v - lo) / step));
  c = std::clamp(c, 0, n_cells - 1);
  while (c + 1 <= n_cells - 1 && v >= node(c + 1)) ++c;
  while (c > 0 && v < node(c)) --c;
  return c;
}

}  // namespace

std::pair<int, int> GridSpec::cell_of(Point p) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !contains(p)) {
    fail(Errc::out_of_bounds, "point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                  ") lies outside the grid domain");
  }
  const int ci = locate(p.x, domain_.x0, dx(), cells_x(), [this](int i) { return node_x(i); });
  const int cj = locate(p.y, domain_.y0, dy(), cells_y(), [this](int j) { return node_y(j); });
  return {ci, cj};
}

std::array<int, 4> GridSpec::cell_corners(int ci, int cj) const {
  return {index(ci, cj), index(ci + 1, cj), index(ci, cj + 1), index(ci + 1, cj + 1)};
}

// ---------------------------------------------------------------------------
// Matérn kernel

namespace {

double correlation_at_scaled(double h, double nu) {
  if (h < 1e-12) return 1.0;
  if (h > 700.0) return 0.0;
  if (nu == 0.5) return std::exp(-h);
  const double log_c = (1.0 - nu) * std::log(2.0) - std::lgamma(nu);
  return std::exp(log_c + nu * std::log(h)) * std::cyl_bessel_k(nu, h);
}

// Scaled distance at which the correlation drops to 0.1.
double practical_range_factor(double nu) {
  thread_local double cached_nu = -1.0;
  thread_local double cached_h = 0.0;
  if (nu == cached_nu) return cached_h;
  double lo = std::log(1e-4);
  double hi = std::log(200.0);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (correlation_at_scaled(std::exp(mid), nu) > 0.1) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  cached_nu = nu;
  cached_h = std::exp(0.5 * (lo + hi));
  return cached_h;
}

}  // namespace

void MaternParams::validate() const {
  const auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!ok(range) || !ok(sigma) || !ok(nu)) {
    fail(Errc::invalid_argument, "Matérn parameters must be finite and strictly positive");
  }
}

double MaternParams::scale() const {
  validate();
  return range / practical_range_factor(nu);
}

double matern_correlation(double d, const MaternParams& p) {
  if (!std::isfinite(d) || d < 0.0) {
    fail(Errc::domain, "Matérn distance must be finite and nonnegative");
  }
  return correlation_at_scaled(d / p.scale(), p.nu);
}

double matern_cov(double d, const MaternParams& p) {
  return p.sigma * p.sigma * matern_correlation(d, p);
}

Eigen::MatrixXd build_cov_matrix(const GridSpec& grid, const MaternParams& p) {
  p.validate();
  const int nx = grid.nx();
  const int ny = grid.ny();
  const double scale = p.scale();
  const double var = p.sigma * p.sigma;

  // Stationary kernel on a lattice: entries depend only on the index offsets.
  std::vector<double> table(static_cast<std::size_t>(nx) * ny);
  for (int dj = 0; dj < ny; ++dj) {
    for (int di = 0; di < nx; ++di) {
      const double d = std::hypot(di * grid.dx(), dj * grid.dy());
      table[static_cast<std::size_t>(dj) * nx + di] = var * correlation_at_scaled(d / scale, p.nu);
    }
  }

  const int n = grid.size();
  Eigen::MatrixXd cov(n, n);
  for (int b = 0; b < n; ++b) {
    const int ib = b % nx;
    const int jb = b / nx;
    for (int a = 0; a < n; ++a) {
      const int di = std::abs(a % nx - ib);
      const int dj = std::abs(a / nx - jb);
      cov(a, b) = table[static_cast<std::size_t>(dj) * nx + di];
    }
  }
  return cov;
}

double JitteredCholesky::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

JitteredCholesky cholesky_with_jitter(Eigen::MatrixXd m, double scale) {
  if (!m.allFinite()) fail(Errc::numeric, "matrix to factorize has non-finite entries");
  JitteredCholesky out;
  out.llt.compute(m);
  if (out.llt.info() == Eigen::Success) return out;

  double jitter = 1e-10 * scale;
  double applied = 0.0;
  for (int attempt = 0; attempt <= 4; ++attempt, jitter *= 10.0) {
    m.diagonal().array() += jitter - applied;
    applied = jitter;
    out.llt.compute(m);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = jitter;
      return out;
    }
  }
  fail(Errc::factorization, "Cholesky failed after diagonal jitter up to " + std::to_string(applied));
}

FieldRealization sample_field(const GridSpec& grid, const MaternParams& p, std::uint64_t seed) {
  const auto chol = cholesky_with_jitter(build_cov_matrix(grid, p), p.sigma * p.sigma);
  const CounterRng rng(seed);
  Eigen::VectorXd z(grid.size());
  for (int i = 0; i < grid.size(); ++i) z[i] = rng.normal(static_cast<std::uint64_t>(i));
  Eigen::VectorXd values = chol.llt.matrixL() * z;
  return {grid, std::move(values), p, seed};
}

Stencil bilinear_stencil(const GridSpec& grid, Point s) {
  const auto [ci, cj] = grid.cell_of(s);
  const double x0 = grid.node_x(ci);
  const double y0 = grid.node_y(cj);
  double t = s.x == grid.node_x(ci + 1) ? 1.0 : std::clamp((s.x - x0) / grid.dx(), 0.0, 1.0);
  double r = s.y == grid.node_y(cj + 1) ? 1.0 : std::clamp((s.y - y0) / grid.dy(), 0.0, 1.0);
  Stencil st;
  st.node = grid.cell_corners(ci, cj);
  st.weight = {(1.0 - t) * (1.0 - r), t * (1.0 - r), (1.0 - t) * r, t * r};
  return st;
}

double interpolate(const GridSpec& grid, const Eigen::VectorXd& values, Point s) {
  if (values.size() != grid.size()) {
    fail(Errc::invalid_argument, "field length does not match grid size");
  }
  return bilinear_stencil(grid, s).apply(values);
}

double interpolate(const FieldRealization& f, Point s) { return interpolate(f.grid, f.values, s); }

}  // namespace prefsdm
