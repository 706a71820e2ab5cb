#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "metalens/errors.hpp"

namespace metalens {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
// One point per row.
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;

/// Node-centered rectangular grid with trapezoidal quadrature weights.
/// Nodes are stored row-major with x fastest: node(ix, iy) = row iy*nx + ix.
struct Grid2 {
  int nx = 0, ny = 0;
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  Points2 nodes;
  Eigen::VectorXd weights;

  static Grid2 uniform(int nx, int ny, double x_min, double x_max,
                       double y_min, double y_max);

  int size() const { return nx * ny; }
  int index(int ix, int iy) const { return iy * nx + ix; }
  Vec2 node(int i) const { return nodes.row(i); }
  double dx() const { return (x_max - x_min) / (nx - 1); }
  double dy() const { return (y_max - y_min) / (ny - 1); }
  double area() const { return (x_max - x_min) * (y_max - y_min); }
  double diameter() const { return std::hypot(x_max - x_min, y_max - y_min); }
  bool same_layout(const Grid2& other) const;
};

/// Graph surface z = h(x). Either an analytic pair (value, gradient),
/// a constant height, or a bilinear interpolant of sampled heights.
class Surface {
 public:
  enum class Kind { Constant, Analytic, Sampled };

  Surface() = default;

  static Surface constant(double height);
  static Surface analytic(ScalarField value, VectorField gradient);
  /// Heights row-major over a uniform grid (x fastest), bilinear in between.
  static Surface sampled(int nx, int ny, double x_min, double x_max,
                         double y_min, double y_max, Eigen::VectorXd heights);
  static Surface load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  double value(const Vec2& p) const;
  Vec2 gradient(const Vec2& p) const;

  Kind kind() const { return kind_; }
  bool is_constant() const { return kind_ == Kind::Constant; }
  double constant_value() const { return height_; }

  // Sampled-surface payload (valid when kind() == Kind::Sampled).
  int sample_nx() const { return nx_; }
  int sample_ny() const { return ny_; }
  const Eigen::VectorXd& sample_heights() const { return heights_; }
  double sample_x_min() const { return x_min_; }
  double sample_x_max() const { return x_max_; }
  double sample_y_min() const { return y_min_; }
  double sample_y_max() const { return y_max_; }

 private:
  Kind kind_ = Kind::Constant;
  double height_ = 0;
  ScalarField value_;
  VectorField gradient_;
  int nx_ = 0, ny_ = 0;
  double x_min_ = 0, x_max_ = 0, y_min_ = 0, y_max_ = 0;
  Eigen::VectorXd heights_;
};

/// Unit direction field e(x) with e3 > 0: collimated or point source.
class IncidentField {
 public:
  enum class Kind { Collimated, PointSource };

  static IncidentField collimated();
  /// Source strictly below the plane z = 0; throws InvalidSource otherwise.
  static IncidentField point_source(const Vec3& p);

  Vec3 direction(const Vec2& x) const;
  Kind kind() const { return kind_; }
  const Vec3& source() const { return source_; }

 private:
  Kind kind_ = Kind::Collimated;
  Vec3 source_ = Vec3::Zero();
};

/// Ray-surface correspondence x -> phi(x) with its Jacobian.
struct PhiMap {
  std::function<Vec2(const Vec2&)> map;
  std::function<Mat2(const Vec2&)> jacobian;

  static PhiMap identity();
};

struct PhiResult {
  Vec2 point;
  Mat2 jacobian;
};

/// Intersects the ray {(x,0) + t e(x) : t > 0} with z = f and returns the
/// lateral hit coordinates together with the Jacobian of the hit map.
/// t_max <= 0 selects an automatic expanding bracket. The Jacobian is
/// analytic for constant f and central-difference otherwise (step fd_step).
PhiResult compute_phi(const IncidentField& field, const Surface& f,
                      const Vec2& x, double t_max = 0.0,
                      double fd_step = 1e-4);

/// Packages compute_phi over a working grid: bracket from the grid maximum
/// of f and FD step scaled by the grid diameter. Collapses to the identity
/// map for collimated fields.
PhiMap make_phi_map(const IncidentField& field, const Surface& f,
                    const Grid2& domain);

/// Weighted point cloud of total mass one.
struct DiscreteMeasure {
  Points2 points;
  Eigen::VectorXd masses;

  int size() const { return static_cast<int>(masses.size()); }
};

/// Samples density on the grid, multiplies by quadrature weights, drops
/// near-zero nodes and normalizes to unit mass.
DiscreteMeasure build_measure(const Grid2& grid, const ScalarField& density);

}  // namespace metalens
