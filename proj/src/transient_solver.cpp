#include "mjpb/transient_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mjpb {

std::vector<double> time_grid(double horizon, int k_points) {
  if (!(horizon > 0)) throw std::invalid_argument("time_grid: horizon must be positive");
  if (k_points < 2) throw std::invalid_argument("time_grid: need at least 2 points");
  std::vector<double> grid(k_points);
  for (int k = 0; k < k_points; ++k)
    grid[k] = horizon * static_cast<double>(k) / static_cast<double>(k_points - 1);
  grid.back() = horizon;
  return grid;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// RMS norm used for all error control.
double rms_norm(const Vec& x) {
  return std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

Vec scale_vector(const Vec& y, double rtol, double atol) {
  return (atol + rtol * y.array().abs()).matrix();
}

// ---------------------------------------------------------------------------
// Adaptive-order BDF/NDF integrator for the linear system y' = M y.
//
// Variable step size is handled in backward-difference form; because the
// right-hand side is linear with exactly known Jacobian M, each quasi-Newton
// iteration is a single sparse LU solve and terminates after two sweeps.
// ---------------------------------------------------------------------------
class BdfIntegrator {
 public:
  static constexpr int kMaxOrder = 5;
  static constexpr int kNewtonMaxIter = 4;
  static constexpr double kMinFactor = 0.2;
  static constexpr double kMaxFactor = 10.0;

  BdfIntegrator(const SpMat& m, const Vec& y0, double t_bound, const SolverOptions& opts,
                SolverStats& stats)
      : m_(m), t_bound_(t_bound), rtol_(opts.rtol), atol_(opts.atol), stats_(stats) {
    n_ = static_cast<int>(y0.size());
    t_ = 0.0;
    order_ = 1;
    n_equal_steps_ = 0;
    newton_tol_ = std::max(10.0 * std::numeric_limits<double>::epsilon() / rtol_,
                           std::min(0.03, std::sqrt(rtol_)));

    kappa_ = {0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0};
    gamma_.assign(kMaxOrder + 1, 0.0);
    for (int k = 1; k <= kMaxOrder; ++k) gamma_[k] = gamma_[k - 1] + 1.0 / k;
    alpha_.resize(kMaxOrder + 1);
    error_const_.resize(kMaxOrder + 1);
    for (int k = 0; k <= kMaxOrder; ++k) {
      alpha_[k] = (1.0 - kappa_[k]) * gamma_[k];
      error_const_[k] = kappa_[k] * gamma_[k] + 1.0 / (k + 1);
    }

    d_.assign(kMaxOrder + 3, Vec::Zero(n_));
    d_[0] = y0;
    const Vec f0 = mul(y0);
    h_ = select_initial_step(y0, f0);
    d_[1] = h_ * f0;
    lu_c_ = std::numeric_limits<double>::quiet_NaN();
  }

  double t() const { return t_; }
  double t_old() const { return t_prev_; }
  bool finished() const { return t_ >= t_bound_; }

  // One accepted step; on return [t_old(), t()] is covered by interpolate().
  void step() {
    const double t_floor = 10.0 * std::numeric_limits<double>::epsilon() *
                           std::max(1.0, std::fabs(t_));
    const double max_step = t_bound_ - t_;
    if (max_step <= t_floor) {  // only a roundoff sliver left
      t_prev_ = t_;
      t_ = t_bound_;
      return;
    }
    if (h_ > max_step) apply_step_factor(max_step / h_);

    bool accepted = false;
    while (!accepted) {
      if (h_ < t_floor)
        throw SolverFailure("step size underflow (system too stiff for requested tolerance)", t_);

      const double t_new = t_ + h_;
      Vec y_predict = Vec::Zero(n_);
      for (int i = 0; i <= order_; ++i) y_predict += d_[i];
      const Vec scale = scale_vector(y_predict, rtol_, atol_);

      Vec psi = Vec::Zero(n_);
      for (int i = 1; i <= order_; ++i) psi += gamma_[i] * d_[i];
      psi /= alpha_[order_];

      const double c = h_ * alpha_[order_];
      refresh_lu(c);

      Vec y = y_predict;
      Vec dcorr = Vec::Zero(n_);
      bool converged = false;
      for (int it = 0; it < kNewtonMaxIter; ++it) {
        const Vec f = mul(y);
        const Vec dy = lu_.solve(c * f - psi - dcorr);
        y += dy;
        dcorr += dy;
        if (rms_norm(dy.cwiseQuotient(scale)) < newton_tol_) {
          converged = true;
          break;
        }
      }
      if (!converged) {  // cannot happen for exact linear solves unless LU failed
        apply_step_factor(0.5);
        continue;
      }

      const Vec error = error_const_[order_] * dcorr;
      const double error_norm = rms_norm(error.cwiseQuotient(scale));
      if (error_norm > 1.0) {
        ++stats_.rejected;
        const double factor =
            std::max(kMinFactor, 0.9 * std::pow(error_norm, -1.0 / (order_ + 1)));
        apply_step_factor(factor);
        continue;
      }

      // Accept.
      ++stats_.steps;
      ++n_equal_steps_;
      t_prev_ = t_;
      t_ = t_new;
      d_[order_ + 2] = dcorr - d_[order_ + 1];
      d_[order_ + 1] = dcorr;
      for (int i = order_; i >= 0; --i) d_[i] += d_[i + 1];
      accepted = true;

      if (n_equal_steps_ < order_ + 1) continue;

      // Consider changing the order once enough equal steps accumulated.
      const double inf = std::numeric_limits<double>::infinity();
      double err_m = inf, err_p = inf;
      if (order_ > 1)
        err_m = rms_norm((error_const_[order_ - 1] * d_[order_]).cwiseQuotient(scale));
      if (order_ < kMaxOrder)
        err_p = rms_norm((error_const_[order_ + 1] * d_[order_ + 2]).cwiseQuotient(scale));

      auto step_factor = [](double err, int ord) {
        return err == 0.0 ? kMaxFactor
                          : (std::isinf(err) ? 0.0 : std::pow(err, -1.0 / (ord + 1)));
      };
      const double f_m = step_factor(err_m, order_ - 1);
      const double f_c = step_factor(error_norm, order_);
      const double f_p = step_factor(err_p, order_ + 1);

      int best = 0;
      double best_f = f_m;
      if (f_c >= best_f) {
        best = 1;
        best_f = f_c;
      }
      if (f_p > best_f) {
        best = 2;
        best_f = f_p;
      }
      order_ += best - 1;
      const double factor = std::min(kMaxFactor, 0.9 * best_f);
      apply_step_factor(std::max(kMinFactor, factor));
    }
  }

  // Evaluate the interpolating polynomial at t in [t_old, t]; exact at t.
  // The difference array is kept consistent with the current h (rescaled on
  // every step-size change), so the Newton backward-difference form applies.
  Vec interpolate(double t_query) const {
    Vec out = d_[0];
    double prod = 1.0;
    for (int j = 1; j <= order_; ++j) {
      prod *= (t_query - (t_ - (j - 1) * h_)) / (j * h_);
      out += prod * d_[j];
    }
    return out;
  }

  const Vec& current() const { return d_[0]; }

 private:
  Vec mul(const Vec& y) {
    ++stats_.matvecs;
    return m_ * y;
  }

  double select_initial_step(const Vec& y0, const Vec& f0) {
    const Vec scale = scale_vector(y0, rtol_, atol_);
    const double d0 = rms_norm(y0.cwiseQuotient(scale));
    const double d1 = rms_norm(f0.cwiseQuotient(scale));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t_bound_);
    const Vec y1 = y0 + h0 * f0;
    const Vec f1 = mul(y1);
    const double d2 = rms_norm((f1 - f0).cwiseQuotient(scale)) / h0;
    double h1;
    if (d1 <= 1e-15 && d2 <= 1e-15)
      h1 = std::max(1e-6, h0 * 1e-3);
    else
      h1 = std::pow(0.01 / std::max(d1, d2), 0.5);
    return std::min({100.0 * h0, h1, t_bound_});
  }

  // Rescale the difference array for a new step size h_new = factor * h.
  void apply_step_factor(double factor) {
    const int ord = order_;
    std::vector<std::vector<double>> r = compute_r(ord, factor);
    std::vector<std::vector<double>> u = compute_r(ord, 1.0);
    // ru = r * u
    std::vector<std::vector<double>> ru(ord + 1, std::vector<double>(ord + 1, 0.0));
    for (int i = 0; i <= ord; ++i)
      for (int k = 0; k <= ord; ++k)
        for (int j = 0; j <= ord; ++j) ru[i][j] += r[i][k] * u[k][j];
    std::vector<Vec> nd(ord + 1, Vec::Zero(n_));
    for (int i = 0; i <= ord; ++i)
      for (int j = 0; j <= ord; ++j) nd[i] += ru[j][i] * d_[j];
    for (int i = 0; i <= ord; ++i) d_[i] = std::move(nd[i]);
    h_ *= factor;
    n_equal_steps_ = 0;
  }

  static std::vector<std::vector<double>> compute_r(int order, double factor) {
    std::vector<std::vector<double>> m(order + 1, std::vector<double>(order + 1, 0.0));
    for (int j = 0; j <= order; ++j) m[0][j] = 1.0;
    for (int i = 1; i <= order; ++i)
      for (int j = 1; j <= order; ++j) m[i][j] = (i - 1 - factor * j) / i;
    // cumulative product down the columns
    for (int i = 1; i <= order; ++i)
      for (int j = 0; j <= order; ++j) m[i][j] *= m[i - 1][j];
    return m;
  }

  void refresh_lu(double c) {
    if (c == lu_c_) return;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(m_.nonZeros() + n_);
    for (int col = 0; col < m_.outerSize(); ++col)
      for (SpMat::InnerIterator it(m_, col); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), col, -c * it.value());
    for (int i = 0; i < n_; ++i) trips.emplace_back(i, i, 1.0);
    SpMat a(n_, n_);
    a.setFromTriplets(trips.begin(), trips.end());
    lu_.compute(a);
    ++stats_.factorizations;
    if (lu_.info() != Eigen::Success)
      throw SolverFailure("sparse LU factorization failed", t_);
    lu_c_ = c;
  }

  const SpMat& m_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  double lu_c_;
  int n_;
  double t_ = 0.0, t_prev_ = 0.0, t_bound_;
  double h_ = 0.0;
  int order_;
  int n_equal_steps_;
  double rtol_, atol_, newton_tol_;
  std::vector<double> kappa_, gamma_, alpha_, error_const_;
  std::vector<Vec> d_;
  SolverStats& stats_;
};

// ---------------------------------------------------------------------------
// Dormand-Prince RK45 fallback for small / non-stiff systems.  Steps land on
// every requested grid time exactly, so no dense output is needed.
// ---------------------------------------------------------------------------
class Rk45Integrator {
 public:
  Rk45Integrator(const SpMat& m, const Vec& y0, const SolverOptions& opts, SolverStats& stats)
      : m_(m), y_(y0), rtol_(opts.rtol), atol_(opts.atol), stats_(stats) {
    f0_ = mul(y_);
    h_ = 1e-4;
  }

  const Vec& current() const { return y_; }

  void advance_to(double t_target) {
    while (t_ < t_target) {
      const double t_floor =
          10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(t_));
      if (h_ < t_floor)
        throw SolverFailure("step size underflow in RK45 (system likely stiff)", t_);
      double h = std::min(h_, t_target - t_);
      const bool clipped = h < h_;

      // Dormand-Prince 5(4) pair.
      const Vec k1 = f0_;
      const Vec k2 = mul(y_ + h * (0.2 * k1));
      const Vec k3 = mul(y_ + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
      const Vec k4 = mul(y_ + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
      const Vec k5 = mul(y_ + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 +
                                   64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4));
      const Vec k6 = mul(y_ + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 +
                                   46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4 -
                                   5103.0 / 18656.0 * k5));
      const Vec y_new = y_ + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 -
                                  2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
      const Vec k7 = mul(y_new);
      const Vec err = h * (71.0 / 57600.0 * k1 - 71.0 / 16695.0 * k3 + 71.0 / 1920.0 * k4 -
                           17253.0 / 339200.0 * k5 + 22.0 / 525.0 * k6 - 1.0 / 40.0 * k7);
      const Vec scale =
          (atol_ + rtol_ * y_.array().abs().max(y_new.array().abs())).matrix();
      const double error_norm = rms_norm(err.cwiseQuotient(scale));

      if (error_norm <= 1.0) {
        ++stats_.steps;
        t_ += h;
        y_ = y_new;
        f0_ = k7;
        const double grow = error_norm == 0.0 ? 10.0
                                              : std::min(10.0, 0.9 * std::pow(error_norm, -0.2));
        if (!clipped) h_ = h * std::max(0.2, grow);
      } else {
        ++stats_.rejected;
        h_ = h * std::max(0.2, 0.9 * std::pow(error_norm, -0.2));
      }
    }
  }

 private:
  Vec mul(const Vec& y) {
    ++stats_.matvecs;
    return m_ * y;
  }

  const SpMat& m_;
  Vec y_, f0_;
  double t_ = 0.0;
  double h_;
  double rtol_, atol_;
  SolverStats& stats_;
};

SpMat to_eigen(const SparseGenerator& gen, bool transpose) {
  std::vector<Eigen::Triplet<double>> trips;
  for (int r = 0; r < gen.dimension; ++r)
    for (const auto& [c, v] : gen.rows[r]) {
      if (transpose)
        trips.emplace_back(c, r, v);
      else
        trips.emplace_back(r, c, v);
    }
  SpMat m(gen.dimension, gen.dimension);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

TimeGridSolution integrate_on_grid(const SpMat& m, const std::vector<double>& init,
                                   const std::vector<double>& grid, const SolverOptions& opts) {
  const int n = static_cast<int>(m.rows());
  if (static_cast<int>(init.size()) != n)
    throw std::invalid_argument("solver: vector length does not match generator dimension");
  for (size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1]))
      throw std::invalid_argument("solver: time grid must be strictly increasing");
  if (grid.front() != 0.0)
    throw std::invalid_argument("solver: time grid must start at 0");

  TimeGridSolution sol;
  sol.times = grid;
  sol.values.assign(grid.size(), {});
  Vec y0 = Eigen::Map<const Vec>(init.data(), n);
  sol.values[0].assign(y0.data(), y0.data() + n);

  const double t_end = grid.back();
  if (opts.method == SolverOptions::Method::Rk45) {
    Rk45Integrator rk(m, y0, opts, sol.stats);
    for (size_t k = 1; k < grid.size(); ++k) {
      rk.advance_to(grid[k]);
      sol.values[k].assign(rk.current().data(), rk.current().data() + n);
    }
    return sol;
  }

  BdfIntegrator bdf(m, y0, t_end, opts, sol.stats);
  size_t next = 1;
  while (next < grid.size()) {
    bdf.step();
    while (next < grid.size() && grid[next] <= bdf.t() + 1e-14 * t_end) {
      const Vec y = bdf.interpolate(std::min(grid[next], bdf.t()));
      sol.values[next].assign(y.data(), y.data() + n);
      ++next;
    }
    if (bdf.finished() && next < grid.size()) {
      // Guard against a final grid point equal to t within roundoff.
      const Vec y = bdf.current();
      sol.values[next].assign(y.data(), y.data() + n);
      ++next;
    }
  }
  return sol;
}

}  // namespace

TimeGridSolution solve_forward(const SparseGenerator& gen, const std::vector<double>& init,
                               const std::vector<double>& grid, const SolverOptions& opts) {
  const SpMat m = to_eigen(gen, /*transpose=*/true);
  return integrate_on_grid(m, init, grid, opts);
}

TimeGridSolution solve_backward(const SparseGenerator& gen, const std::vector<double>& terminal,
                                const std::vector<double>& grid, const SolverOptions& opts) {
  const SpMat m = to_eigen(gen, /*transpose=*/false);
  // beta(t) = exp(Q (T - t)) beta_T: integrate g' = Q g forward in s = T - t,
  // then reverse the grid indexing.
  std::vector<double> sgrid(grid.size());
  const double horizon = grid.back();
  for (size_t k = 0; k < grid.size(); ++k) sgrid[k] = horizon - grid[grid.size() - 1 - k];
  sgrid.front() = 0.0;
  sgrid.back() = horizon;
  TimeGridSolution gsol = integrate_on_grid(m, terminal, sgrid, opts);

  TimeGridSolution sol;
  sol.times = grid;
  sol.stats = gsol.stats;
  sol.values.resize(grid.size());
  for (size_t k = 0; k < grid.size(); ++k)
    sol.values[k] = std::move(gsol.values[grid.size() - 1 - k]);
  return sol;
}

}  // namespace mjpb
