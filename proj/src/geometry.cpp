#include "metalens/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace metalens {

Grid2 Grid2::uniform(int nx, int ny, double x_min, double x_max, double y_min,
                     double y_max) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("Grid2: nx, ny must be >= 2");
  if (!(x_max > x_min) || !(y_max > y_min))
    throw std::invalid_argument("Grid2: empty bounds");
  Grid2 g;
  g.nx = nx;
  g.ny = ny;
  g.x_min = x_min;
  g.x_max = x_max;
  g.y_min = y_min;
  g.y_max = y_max;
  g.nodes.resize(nx * ny, 2);
  g.weights.resize(nx * ny);
  const double dx = g.dx(), dy = g.dy();
  for (int iy = 0; iy < ny; ++iy) {
    const double wy = (iy == 0 || iy == ny - 1) ? 0.5 : 1.0;
    for (int ix = 0; ix < nx; ++ix) {
      const double wx = (ix == 0 || ix == nx - 1) ? 0.5 : 1.0;
      const int i = g.index(ix, iy);
      g.nodes(i, 0) = x_min + ix * dx;
      g.nodes(i, 1) = y_min + iy * dy;
      g.weights(i) = wx * wy * dx * dy;
    }
  }
  return g;
}

bool Grid2::same_layout(const Grid2& o) const {
  return nx == o.nx && ny == o.ny && x_min == o.x_min && x_max == o.x_max &&
         y_min == o.y_min && y_max == o.y_max;
}

// ---------------------------------------------------------------------------
// Surface

Surface Surface::constant(double height) {
  Surface s;
  s.kind_ = Kind::Constant;
  s.height_ = height;
  return s;
}

Surface Surface::analytic(ScalarField value, VectorField gradient) {
  Surface s;
  s.kind_ = Kind::Analytic;
  s.value_ = std::move(value);
  s.gradient_ = std::move(gradient);
  return s;
}

Surface Surface::sampled(int nx, int ny, double x_min, double x_max,
                         double y_min, double y_max,
                         Eigen::VectorXd heights) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("Surface: nx, ny must be >= 2");
  if (heights.size() != static_cast<Eigen::Index>(nx) * ny)
    throw std::invalid_argument("Surface: height count does not match nx*ny");
  Surface s;
  s.kind_ = Kind::Sampled;
  s.nx_ = nx;
  s.ny_ = ny;
  s.x_min_ = x_min;
  s.x_max_ = x_max;
  s.y_min_ = y_min;
  s.y_max_ = y_max;
  s.heights_ = std::move(heights);
  return s;
}

namespace {

// Locates the bilinear patch containing p; clamps to the boundary patches so
// that queries slightly outside the sampled box extrapolate linearly.
struct Patch {
  int ix, iy;
  double sx, sy;  // local coordinates, unclamped
};

Patch locate(const Vec2& p, int nx, int ny, double x_min, double x_max,
             double y_min, double y_max) {
  const double dx = (x_max - x_min) / (nx - 1);
  const double dy = (y_max - y_min) / (ny - 1);
  int ix = static_cast<int>(std::floor((p.x() - x_min) / dx));
  int iy = static_cast<int>(std::floor((p.y() - y_min) / dy));
  ix = std::clamp(ix, 0, nx - 2);
  iy = std::clamp(iy, 0, ny - 2);
  return {ix, iy, (p.x() - (x_min + ix * dx)) / dx,
          (p.y() - (y_min + iy * dy)) / dy};
}

}  // namespace

double Surface::value(const Vec2& p) const {
  switch (kind_) {
    case Kind::Constant:
      return height_;
    case Kind::Analytic:
      return value_(p);
    case Kind::Sampled: {
      const Patch c = locate(p, nx_, ny_, x_min_, x_max_, y_min_, y_max_);
      const double h00 = heights_(c.iy * nx_ + c.ix);
      const double h10 = heights_(c.iy * nx_ + c.ix + 1);
      const double h01 = heights_((c.iy + 1) * nx_ + c.ix);
      const double h11 = heights_((c.iy + 1) * nx_ + c.ix + 1);
      return (1 - c.sx) * (1 - c.sy) * h00 + c.sx * (1 - c.sy) * h10 +
             (1 - c.sx) * c.sy * h01 + c.sx * c.sy * h11;
    }
  }
  return 0;
}

Vec2 Surface::gradient(const Vec2& p) const {
  switch (kind_) {
    case Kind::Constant:
      return Vec2::Zero();
    case Kind::Analytic:
      return gradient_(p);
    case Kind::Sampled: {
      const Patch c = locate(p, nx_, ny_, x_min_, x_max_, y_min_, y_max_);
      const double dx = (x_max_ - x_min_) / (nx_ - 1);
      const double dy = (y_max_ - y_min_) / (ny_ - 1);
      const double h00 = heights_(c.iy * nx_ + c.ix);
      const double h10 = heights_(c.iy * nx_ + c.ix + 1);
      const double h01 = heights_((c.iy + 1) * nx_ + c.ix);
      const double h11 = heights_((c.iy + 1) * nx_ + c.ix + 1);
      const double gx =
          ((1 - c.sy) * (h10 - h00) + c.sy * (h11 - h01)) / dx;
      const double gy =
          ((1 - c.sx) * (h01 - h00) + c.sx * (h11 - h10)) / dy;
      return {gx, gy};
    }
  }
  return Vec2::Zero();
}

Surface Surface::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("surface csv: cannot open " + path);
  std::string header;
  std::getline(in, header);
  int nx = 0, ny = 0;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  if (std::sscanf(header.c_str(),
                  "# surface nx=%d ny=%d x0=%lf x1=%lf y0=%lf y1=%lf", &nx,
                  &ny, &x0, &x1, &y0, &y1) != 6)
    throw Error("surface csv: bad header in " + path);
  Eigen::VectorXd heights(static_cast<Eigen::Index>(nx) * ny);
  Eigen::Index k = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell.empty()) continue;
      if (k >= heights.size()) throw Error("surface csv: too many values in " + path);
      heights(k++) = std::stod(cell);
    }
  }
  if (k != heights.size()) throw Error("surface csv: too few values in " + path);
  return sampled(nx, ny, x0, x1, y0, y1, std::move(heights));
}

void Surface::save_csv(const std::string& path) const {
  if (kind_ != Kind::Sampled)
    throw Error("surface csv: only sampled surfaces can be saved");
  std::ofstream out(path);
  if (!out) throw Error("surface csv: cannot write " + path);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "# surface nx=%d ny=%d x0=%.17g x1=%.17g y0=%.17g y1=%.17g\n",
                nx_, ny_, x_min_, x_max_, y_min_, y_max_);
  out << buf;
  for (int iy = 0; iy < ny_; ++iy) {
    for (int ix = 0; ix < nx_; ++ix) {
      std::snprintf(buf, sizeof(buf), "%.17g", heights_(iy * nx_ + ix));
      out << buf << (ix + 1 < nx_ ? "," : "\n");
    }
  }
}

// ---------------------------------------------------------------------------
// IncidentField

IncidentField IncidentField::collimated() {
  IncidentField f;
  f.kind_ = Kind::Collimated;
  return f;
}

IncidentField IncidentField::point_source(const Vec3& p) {
  if (!(p.z() < 0))
    throw InvalidSource("point source must lie strictly below z = 0");
  IncidentField f;
  f.kind_ = Kind::PointSource;
  f.source_ = p;
  return f;
}

Vec3 IncidentField::direction(const Vec2& x) const {
  if (kind_ == Kind::Collimated) return {0, 0, 1};
  Vec3 d(x.x() - source_.x(), x.y() - source_.y(), -source_.z());
  return d / d.norm();
}

// ---------------------------------------------------------------------------
// PhiMap / compute_phi

PhiMap PhiMap::identity() {
  PhiMap m;
  m.map = [](const Vec2& x) { return x; };
  m.jacobian = [](const Vec2&) { return Mat2::Identity(); };
  return m;
}

namespace {

// Signed height of the ray above the surface at parameter t.
double ray_gap(const IncidentField& field, const Surface& f, const Vec2& x,
               const Vec3& e, double t) {
  (void)field;
  const Vec2 lateral = x + t * e.head<2>();
  return t * e.z() - f.value(lateral);
}

double find_hit_parameter(const IncidentField& field, const Surface& f,
                          const Vec2& x, const Vec3& e, double t_max) {
  double t_hi = t_max;
  if (!(t_hi > 0)) {
    // Expanding bracket: start at the vertical-distance guess and double.
    t_hi = std::max(1e-6, 2.0 * std::abs(f.value(x)) / e.z());
    int expansions = 0;
    while (ray_gap(field, f, x, e, t_hi) <= 0) {
      t_hi *= 2;
      if (++expansions > 60)
        throw NoIntersection("ray does not reach the surface");
    }
  }
  if (ray_gap(field, f, x, e, t_hi) <= 0)
    throw NoIntersection("ray does not reach the surface within t_max");

  // Sign-change scan over the bracket: exactly one crossing expected.
  constexpr int kScan = 64;
  double t_lo = 0.0;
  double prev = ray_gap(field, f, x, e, 0.0);
  int crossings = 0;
  double lo = 0, hi = t_hi;
  for (int k = 1; k <= kScan; ++k) {
    const double t = t_hi * k / kScan;
    const double cur = ray_gap(field, f, x, e, t);
    if (prev <= 0 && cur > 0) {
      ++crossings;
      lo = t_hi * (k - 1) / kScan;
      hi = t;
    }
    prev = cur;
  }
  if (crossings == 0) throw NoIntersection("no sign change along the ray");
  if (crossings > 1)
    throw MultipleIntersections("ray crosses the surface more than once");
  t_lo = lo;
  double t_hi2 = hi;

  for (int it = 0; it < 100 && (t_hi2 - t_lo) > 1e-15 * (1 + t_hi2); ++it) {
    const double mid = 0.5 * (t_lo + t_hi2);
    if (ray_gap(field, f, x, e, mid) <= 0)
      t_lo = mid;
    else
      t_hi2 = mid;
  }
  double t = 0.5 * (t_lo + t_hi2);
  // Newton polish on t*e3 - f(x + t*e12).
  for (int it = 0; it < 3; ++it) {
    const Vec2 lateral = x + t * e.head<2>();
    const double g = t * e.z() - f.value(lateral);
    const double dg = e.z() - f.gradient(lateral).dot(e.head<2>());
    if (std::abs(dg) < 1e-14) break;
    t -= g / dg;
  }
  return t;
}

Vec2 phi_point(const IncidentField& field, const Surface& f, const Vec2& x,
               double t_max) {
  if (field.kind() == IncidentField::Kind::Collimated) return x;
  const Vec3 e = field.direction(x);
  if (f.is_constant()) {
    // t e3 = h exactly: phi(x) = x + (h/e3) (e1, e2).
    const double t = f.constant_value() / e.z();
    if (t_max > 0 && t > t_max)
      throw NoIntersection("ray does not reach the surface within t_max");
    return x + t * e.head<2>();
  }
  const double t = find_hit_parameter(field, f, x, e, t_max);
  return x + t * e.head<2>();
}

}  // namespace

PhiResult compute_phi(const IncidentField& field, const Surface& f,
                      const Vec2& x, double t_max, double fd_step) {
  PhiResult r;
  if (field.kind() == IncidentField::Kind::Collimated) {
    r.point = x;
    r.jacobian = Mat2::Identity();
    return r;
  }
  r.point = phi_point(field, f, x, t_max);
  if (f.is_constant()) {
    // phi(x) = x + h (x - p_12)/(-p3), so J = (1 + h/(-p3)) Id.
    const double scale = 1.0 + f.constant_value() / (-field.source().z());
    r.jacobian = scale * Mat2::Identity();
    return r;
  }
  const double h = fd_step;
  for (int k = 0; k < 2; ++k) {
    Vec2 xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const Vec2 fp = phi_point(field, f, xp, t_max);
    const Vec2 fm = phi_point(field, f, xm, t_max);
    r.jacobian.col(k) = (fp - fm) / (2 * h);
  }
  return r;
}

PhiMap make_phi_map(const IncidentField& field, const Surface& f,
                    const Grid2& domain) {
  if (field.kind() == IncidentField::Kind::Collimated) return PhiMap::identity();

  double f_max = 0, e3_min = 1;
  for (int i = 0; i < domain.size(); ++i) {
    const Vec2 x = domain.node(i);
    f_max = std::max(f_max, std::abs(f.value(x)));
    e3_min = std::min(e3_min, field.direction(x).z());
  }
  const double t_max = 2.0 * std::max(f_max, 1e-9) / e3_min;
  const double step = 1e-4 * domain.diameter();

  PhiMap m;
  m.map = [field, f, t_max](const Vec2& x) {
    return phi_point(field, f, x, t_max);
  };
  m.jacobian = [field, f, t_max, step](const Vec2& x) {
    return compute_phi(field, f, x, t_max, step).jacobian;
  };
  return m;
}

// ---------------------------------------------------------------------------
// build_measure

DiscreteMeasure build_measure(const Grid2& grid, const ScalarField& density) {
  const int n = grid.size();
  Eigen::VectorXd d(n);
  double d_max = 0;
  for (int i = 0; i < n; ++i) {
    d(i) = density(grid.node(i));
    if (d(i) < 0)
      throw NegativeDensity("density is negative at a grid node");
    d_max = std::max(d_max, d(i));
  }
  if (d_max <= 0) throw AllZeroDensity("density vanishes on the whole grid");

  const double cutoff = 1e-14 * d_max;
  int kept = 0;
  for (int i = 0; i < n; ++i)
    if (d(i) > cutoff) ++kept;

  DiscreteMeasure m;
  m.points.resize(kept, 2);
  m.masses.resize(kept);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    if (d(i) <= cutoff) continue;
    m.points.row(k) = grid.nodes.row(i);
    m.masses(k) = d(i) * grid.weights(i);
    ++k;
  }
  m.masses /= m.masses.sum();
  return m;
}

}  // namespace metalens
