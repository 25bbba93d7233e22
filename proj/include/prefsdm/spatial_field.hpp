#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <utility>

namespace prefsdm {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double diameter() const;
  bool contains(Point p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  bool operator==(const Rect&) const = default;
};

// Regular node lattice over a rectangle. Nodes are stored row-major: the node
// at column i (x) and row j (y) has index j * nx + i. Cells are the
// (nx-1) x (ny-1) rectangles spanned by adjacent nodes, indexed the same way.
class GridSpec {
 public:
  GridSpec(int nx, int ny, Rect domain = {});

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const Rect& domain() const { return domain_; }
  int size() const { return nx_ * ny_; }
  int cells_x() const { return nx_ - 1; }
  int cells_y() const { return ny_ - 1; }
  int n_cells() const { return cells_x() * cells_y(); }
  double dx() const { return domain_.width() / (nx_ - 1); }
  double dy() const { return domain_.height() / (ny_ - 1); }
  double cell_area() const { return domain_.area() / (static_cast<double>(nx_ - 1) * (ny_ - 1)); }

  double node_x(int i) const;
  double node_y(int j) const;
  int index(int i, int j) const { return j * nx_ + i; }
  Point node(int idx) const { return {node_x(idx % nx_), node_y(idx / nx_)}; }
  bool contains(Point p) const { return domain_.contains(p); }

  // Cell (ci, cj) holding p. Points on a shared edge go to the upper/right
  // cell; points on the outer boundary go to the adjacent interior cell.
  // Throws out_of_bounds outside the domain.
  std::pair<int, int> cell_of(Point p) const;

  // Node indices of the four corners of cell (ci, cj): (i,j), (i+1,j), (i,j+1), (i+1,j+1).
  std::array<int, 4> cell_corners(int ci, int cj) const;

  bool operator==(const GridSpec&) const = default;

 private:
  int nx_;
  int ny_;
  Rect domain_;
};

// Matérn kernel parameterized by practical range: correlation at distance
// `range` is 0.1.
struct MaternParams {
  double range = 0.5;
  double sigma = 1.0;
  double nu = 1.0;

  void validate() const;
  // Distance scale rho such that correlation(d) = M_nu(d / rho).
  double scale() const;
};

double matern_correlation(double d, const MaternParams& p);
double matern_cov(double d, const MaternParams& p);

Eigen::MatrixXd build_cov_matrix(const GridSpec& grid, const MaternParams& p);

// Cholesky factorization with the diagonal jitter schedule: first attempt
// without jitter, then 1e-10 * scale added to the diagonal, escalated x10 at
// most four times. Throws factorization on failure.
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  double log_det() const;
};

JitteredCholesky cholesky_with_jitter(Eigen::MatrixXd m, double scale);

struct FieldRealization {
  GridSpec grid;
  Eigen::VectorXd values;
  MaternParams params;
  std::uint64_t seed = 0;
};

FieldRealization sample_field(const GridSpec& grid, const MaternParams& p, std::uint64_t seed);

// Bilinear interpolation weights of a point over its enclosing cell.
struct Stencil {
  std::array<int, 4> node{};
  std::array<double, 4> weight{};

  double apply(const Eigen::VectorXd& values) const {
    return weight[0] * values[node[0]] + weight[1] * values[node[1]] +
           weight[2] * values[node[2]] + weight[3] * values[node[3]];
  }
};

Stencil bilinear_stencil(const GridSpec& grid, Point s);

double interpolate(const GridSpec& grid, const Eigen::VectorXd& values, Point s);
double interpolate(const FieldRealization& f, Point s);

}  // namespace prefsdm
