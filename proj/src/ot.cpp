#include "metalens/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

namespace metalens {

CostMatrix build_cost_matrix(const CostModel& model, const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu) {
  const int m = mu.size(), n = nu.size();
  CostMatrix cm;
  cm.row_points = mu.points;
  cm.col_points = nu.points;
  cm.entries.resize(m, n);

  // Source-side quantities depend only on the row.
  Points2 xp(m, 2);
  Eigen::VectorXd fxp(m);
  for (int i = 0; i < m; ++i) {
    const Vec2 p = model.phi.map(Vec2(mu.points.row(i)));
    xp.row(i) = p;
    fxp(i) = model.f.value(p);
  }
  Eigen::VectorXd gy(n);
  for (int j = 0; j < n; ++j) gy(j) = model.g.value(Vec2(nu.points.row(j)));

  for (int i = 0; i < m; ++i) {
    const double xi0 = xp(i, 0), xi1 = xp(i, 1), fi = fxp(i);
    for (int j = 0; j < n; ++j) {
      const double dz = gy(j) - fi;
      const double d0 = xi0 - nu.points(j, 0);
      const double d1 = xi1 - nu.points(j, 1);
      cm.entries(i, j) = std::sqrt(dz * dz + d0 * d0 + d1 * d1);
    }
  }
  return cm;
}

MapExtract extract_map(const Eigen::MatrixXd& plan) {
  const int m = static_cast<int>(plan.rows());
  const int n = static_cast<int>(plan.cols());
  MapExtract ex;
  ex.target.resize(m);
  ex.diffuse.resize(m);
  for (int i = 0; i < m; ++i) {
    int best = 0;
    double best_mass = plan(i, 0);
    double row_mass = plan(i, 0);
    for (int j = 1; j < n; ++j) {
      row_mass += plan(i, j);
      if (plan(i, j) > best_mass) {  // strict: ties keep the lowest column
        best_mass = plan(i, j);
        best = j;
      }
    }
    ex.target[i] = best;
    const double share = row_mass > 0 ? best_mass / row_mass : 0.0;
    ex.diffuse[i] = share < 0.9;
    if (ex.diffuse[i]) {
      ex.diffuse_mass += row_mass;
      ++ex.diffuse_count;
    }
    ex.off_map_mass += row_mass - best_mass;
  }
  return ex;
}

namespace {

void check_balanced(const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  if (std::abs(mu.sum() - nu.sum()) > 1e-9)
    throw std::invalid_argument("transport: marginals are not balanced");
  if (mu.minCoeff() <= 0 || nu.minCoeff() <= 0)
    throw std::invalid_argument("transport: marginals must be positive");
}

// Tighten (psi, psi_c) into a mutually c-transformed pair. The second pass
// makes psi(x_i) = min_j (c_ij - psi_c(y_j)) hold exactly by construction.
void tighten_potentials(const Eigen::MatrixXd& C, Eigen::VectorXd& psi,
                        Eigen::VectorXd& psi_c) {
  const int m = static_cast<int>(C.rows());
  const int n = static_cast<int>(C.cols());
  psi_c.resize(n);
  for (int j = 0; j < n; ++j)
    psi_c(j) = (C.col(j) - psi).minCoeff();
  for (int i = 0; i < m; ++i)
    psi(i) = (C.row(i).transpose() - psi_c).minCoeff();
}

void finalize(TransportSolution& sol, const CostMatrix& cost) {
  sol.row_points = cost.row_points;
  sol.col_points = cost.col_points;
  sol.total_cost = (sol.plan.array() * cost.entries.array()).sum();
  sol.map = extract_map(sol.plan);
}

// --- transportation simplex -------------------------------------------------

struct Arc {
  int i, j;
};

// Spanning-tree basis over the bipartite graph of m rows and n columns.
// Nodes 0..m-1 are rows, m..m+n-1 are columns.
class Basis {
 public:
  Basis(int m, int n) : m_(m), n_(n), adj_(m + n) {}

  void add(int i, int j) {
    adj_[i].push_back(m_ + j);
    adj_[m_ + j].push_back(i);
  }

  void remove(int i, int j) {
    erase(adj_[i], m_ + j);
    erase(adj_[m_ + j], i);
  }

  // Potentials u (rows), v (cols) with u_i + v_j = c_ij on basis arcs.
  void duals(const Eigen::MatrixXd& C, Eigen::VectorXd& u,
             Eigen::VectorXd& v) const {
    u.setZero(m_);
    v.setZero(n_);
    std::vector<char> seen(m_ + n_, 0);
    std::queue<int> q;
    for (int root = 0; root < m_ + n_; ++root) {
      if (seen[root]) continue;
      seen[root] = 1;
      q.push(root);
      while (!q.empty()) {
        const int a = q.front();
        q.pop();
        for (int b : adj_[a]) {
          if (seen[b]) continue;
          seen[b] = 1;
          if (a < m_)
            v(b - m_) = C(a, b - m_) - u(a);
          else
            u(b) = C(b, a - m_) - v(a - m_);
          q.push(b);
        }
      }
    }
  }

  // Unique path from row i to column j through the tree.
  std::vector<int> path(int i, int j) const {
    std::vector<int> parent(m_ + n_, -2);
    parent[i] = -1;
    std::queue<int> q;
    q.push(i);
    const int goal = m_ + j;
    while (!q.empty()) {
      const int a = q.front();
      q.pop();
      if (a == goal) break;
      for (int b : adj_[a]) {
        if (parent[b] != -2) continue;
        parent[b] = a;
        q.push(b);
      }
    }
    std::vector<int> nodes;
    for (int a = goal; a != -1; a = parent[a]) nodes.push_back(a);
    std::reverse(nodes.begin(), nodes.end());
    return nodes;  // starts at row i, ends at column node m + j
  }

 private:
  static void erase(std::vector<int>& v, int x) {
    v.erase(std::find(v.begin(), v.end(), x));
  }

  int m_, n_;
  std::vector<std::vector<int>> adj_;
};

}  // namespace

TransportSolution solve_exact(const CostMatrix& cost,
                              const Eigen::VectorXd& mu_in,
                              const Eigen::VectorXd& nu_in) {
  const int m = cost.rows(), n = cost.cols();
  if (m > 64 || n > 64)
    throw SizeExceeded("solve_exact: instance larger than 64 points per side");
  check_balanced(mu_in, nu_in);
  Eigen::VectorXd mu = mu_in;
  Eigen::VectorXd nu = nu_in * (mu_in.sum() / nu_in.sum());

  const Eigen::MatrixXd& C = cost.entries;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(m, n);
  Basis basis(m, n);

  // Northwest-corner initial basic feasible solution; exactly m+n-1 basic
  // arcs counting the degenerate ones added when row and column close at once.
  {
    Eigen::VectorXd a = mu, b = nu;
    int i = 0, j = 0;
    while (true) {
      const double t = std::min(a(i), b(j));
      X(i, j) = t;
      basis.add(i, j);
      a(i) -= t;
      b(j) -= t;
      if (i == m - 1 && j == n - 1) break;
      if (j == n - 1)
        ++i;
      else if (i == m - 1)
        ++j;
      else if (a(i) <= b(j))
        ++i;
      else
        ++j;
    }
  }

  Eigen::VectorXd u(m), v(n);
  const long max_pivots = 200L * (m + n) * (m + n);
  long pivots = 0;
  for (;; ++pivots) {
    if (pivots > max_pivots)
      throw Error("solve_exact: pivot limit exceeded");
    basis.duals(C, u, v);

    // Entering arc, Bland-style: first violating index pair.
    int ei = -1, ej = -1;
    for (int i = 0; i < m && ei < 0; ++i)
      for (int j = 0; j < n; ++j)
        if (C(i, j) - u(i) - v(j) < -1e-11) {
          ei = i;
          ej = j;
          break;
        }
    if (ei < 0) break;  // optimal

    // Cycle: entering arc plus the tree path from row ei to column ej.
    const std::vector<int> nodes = basis.path(ei, ej);
    std::vector<Arc> minus, plus;
    plus.push_back({ei, ej});
    for (size_t k = 0; k + 1 < nodes.size(); ++k) {
      const int a = nodes[k], b = nodes[k + 1];
      const Arc arc = a < m ? Arc{a, b - m} : Arc{b, a - m};
      // Orientation alternates along the cycle starting with '-' on the
      // first path arc (the cycle is: entering +, then path back).
      if (k % 2 == 0)
        minus.push_back(arc);
      else
        plus.push_back(arc);
    }

    double theta = std::numeric_limits<double>::infinity();
    Arc leaving{-1, -1};
    for (const Arc& a : minus) {  // first strict minimizer, deterministic
      if (X(a.i, a.j) < theta) {
        theta = X(a.i, a.j);
        leaving = a;
      }
    }
    for (const Arc& a : plus) X(a.i, a.j) += theta;
    for (const Arc& a : minus) X(a.i, a.j) -= theta;
    X(leaving.i, leaving.j) = 0;
    basis.remove(leaving.i, leaving.j);
    basis.add(ei, ej);
  }

  TransportSolution sol;
  sol.plan = X;
  sol.mu = mu;
  sol.nu = nu;
  sol.potential_psi = u;
  tighten_potentials(C, sol.potential_psi, sol.potential_psi_c);
  sol.iterations = static_cast<int>(pivots);
  finalize(sol, cost);
  return sol;
}

// --- log-domain Sinkhorn -----------------------------------------------------

TransportSolution solve_sinkhorn(const CostMatrix& cost,
                                 const Eigen::VectorXd& mu_in,
                                 const Eigen::VectorXd& nu_in,
                                 const SinkhornParams& params) {
  check_balanced(mu_in, nu_in);
  const int m = cost.rows(), n = cost.cols();
  const Eigen::MatrixXd& C = cost.entries;
  Eigen::VectorXd mu = mu_in;
  Eigen::VectorXd nu = nu_in * (mu_in.sum() / nu_in.sum());

  const double mean_cost = C.mean();
  const double eps_target =
      params.epsilon > 0 ? params.epsilon : 1e-3 * mean_cost;
  if (!(eps_target > 0)) throw std::invalid_argument("sinkhorn: epsilon <= 0");

  std::vector<double> levels;
  for (double e = 0.1 * mean_cost; e > eps_target; e *= 0.5) levels.push_back(e);
  levels.push_back(eps_target);

  const Eigen::MatrixXd Ct = C.transpose();  // contiguous row access
  const Eigen::VectorXd log_mu = mu.array().log();
  const Eigen::VectorXd log_nu = nu.array().log();
  Eigen::VectorXd fp = Eigen::VectorXd::Zero(m);  // potentials, cost units
  Eigen::VectorXd gp = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd work;
  int total_iter = 0;
  double err = std::numeric_limits<double>::infinity();

  for (size_t lev = 0; lev < levels.size(); ++lev) {
    const double eps = levels[lev];
    const bool final_level = lev + 1 == levels.size();
    const double tol =
        final_level ? params.marginal_tol : std::max(params.marginal_tol, 1e-4);
    int it = 0;
    for (; it < params.max_iter; ++it) {
      // f_i = eps log mu_i - eps LSE_j (g_j - C_ij)/eps
      for (int i = 0; i < m; ++i) {
        work = (gp - Ct.col(i)) / eps;
        const double hi = work.maxCoeff();
        fp(i) = eps * log_mu(i) -
                (eps * std::log((work.array() - hi).exp().sum()) + eps * hi);
      }
      for (int j = 0; j < n; ++j) {
        work = (fp - C.col(j)) / eps;
        const double hi = work.maxCoeff();
        gp(j) = eps * log_nu(j) -
                (eps * std::log((work.array() - hi).exp().sum()) + eps * hi);
      }
      // Column marginals are exact after the g update; measure the rows.
      err = 0;
      for (int i = 0; i < m; ++i) {
        work = (fp(i) - Ct.col(i).array() + gp.array()) / eps;
        err += std::abs(work.array().exp().sum() - mu(i));
      }
      if (err <= tol) break;
    }
    total_iter += it + 1;
    if (final_level && err > params.marginal_tol)
      throw NotConverged("sinkhorn: marginal violation " + std::to_string(err) +
                             " above tolerance after max_iter",
                         err);
  }

  const double eps = levels.back();
  Eigen::MatrixXd P(m, n);
  for (int i = 0; i < m; ++i)
    P.row(i) =
        (((fp(i) - Ct.col(i).array() + gp.array()) / eps).exp()).transpose();

  // Round onto the transportation polytope (scale rows/columns into the
  // feasible box, then patch the residual with a rank-one correction).
  {
    Eigen::VectorXd r = P.rowwise().sum();
    for (int i = 0; i < m; ++i)
      if (r(i) > mu(i)) P.row(i) *= mu(i) / r(i);
    Eigen::VectorXd c = P.colwise().sum();
    for (int j = 0; j < n; ++j)
      if (c(j) > nu(j)) P.col(j) *= nu(j) / c(j);
    const Eigen::VectorXd er = mu - P.rowwise().sum();
    const Eigen::VectorXd ec = nu - P.colwise().sum().transpose();
    const double s = er.sum();
    if (s > 0) P += (er * ec.transpose()) / s;
  }

  TransportSolution sol;
  sol.plan = std::move(P);
  sol.mu = mu;
  sol.nu = nu;
  sol.potential_psi = fp;
  tighten_potentials(C, sol.potential_psi, sol.potential_psi_c);
  sol.marginal_error = err;
  sol.epsilon = eps;
  sol.iterations = total_iter;
  finalize(sol, cost);
  return sol;
}

Vec2 potential_gradient(const CostModel& model, const TransportSolution& sol,
                        int row) {
  if (row < 0 || row >= static_cast<int>(sol.map.target.size()))
    throw std::out_of_range("potential_gradient: row out of range");
  if (sol.map.diffuse[row])
    throw DiffuseRow("potential_gradient: plan row " + std::to_string(row) +
                     " is not concentrated");
  const Vec2 x = sol.row_points.row(row);
  const Vec2 y = sol.col_points.row(sol.map.target[row]);
  return grad_x_cost(model, x, y);
}

}  // namespace metalens
