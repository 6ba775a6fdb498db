#pragma once

// Linear quantile regression: minimise sum_i w_i * rho_tau(y_i - x_i' beta).
//
// Two stages. A Frisch-Newton (Mehrotra predictor-corrector) interior point
// method on the bounded dual LP
//     max y'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1
// gives a near-optimal beta together with a lower bound on the optimum
// (y'a - (1 - tau) 1'y for any feasible a). A vertex descent then moves to an
// exact basic solution: starting from the p observations with the smallest
// interior-point residuals, it follows improving edges of the check-loss
// polyhedron (one basic observation leaves, the first kink along the edge
// where the slope turns nonnegative enters) until no edge descends.
//
// Non-negative weights are folded in by scaling rows, since
// w * rho(u) = rho(w * u) for w >= 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medeff/error.hpp"
#include "medeff/numerics/design.hpp"
#include "medeff/numerics/linear.hpp"

namespace medeff {

struct QuantRegOptions {
  int max_ipm_iterations = 100;
  // Relative optimality gap accepted as a certificate from the interior point stage.
  double gap_tolerance = 1e-11;
  // Cap on vertex pivots; 0 means 10 * (n + p).
  int max_pivots = 0;
};

inline double check_loss(double u, double tau) noexcept { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

inline double check_loss_sum(const Vector& residuals, double tau) noexcept {
  double total = 0.0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) total += check_loss(residuals(i), tau);
  return total;
}

namespace detail {

struct InteriorPointResult {
  Vector beta;
  double objective = std::numeric_limits<double>::infinity();
  double lower_bound = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool certified = false;
};

inline double step_to_boundary(const Vector& v, const Vector& dv) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

inline InteriorPointResult frisch_newton(const Matrix& x, const Vector& y, double tau,
                                         const QuantRegOptions& options) {
  const Eigen::Index n = x.rows();
  InteriorPointResult result;

  const double y_sum = y.sum();
  const Vector b = (1.0 - tau) * x.transpose() * Vector::Ones(n);
  const Vector c = -y;

  Vector a = Vector::Constant(n, 1.0 - tau);
  Vector s = Vector::Constant(n, tau);
  Vector lambda = -x.colPivHouseholderQr().solve(y);
  const Vector r0 = c - x * lambda;
  const double shift = std::max(r0.cwiseAbs().mean(), 1e-8 * (1.0 + y.cwiseAbs().maxCoeff()));
  Vector z = r0.cwiseMax(0.0).array() + shift;
  Vector w = (-r0).cwiseMax(0.0).array() + shift;

  constexpr double eta = 0.99995;

  auto certify = [&]() {
    const Vector beta = -lambda;
    const double objective = check_loss_sum(y - x * beta, tau);
    const double lower = y.dot(a) - (1.0 - tau) * y_sum;
    if (objective < result.objective) {
      result.beta = beta;
      result.objective = objective;
    }
    result.lower_bound = std::max(result.lower_bound, lower);
    return result.objective - result.lower_bound <=
           options.gap_tolerance * std::max(1.0, std::abs(result.objective));
  };

  for (int iter = 1; iter <= options.max_ipm_iterations; ++iter) {
    result.iterations = iter;
    if (certify()) {
      result.certified = true;
      return result;
    }
    const Vector rb = b - x.transpose() * a;
    const Vector rc = c - x * lambda - z + w;
    const double mu = (a.dot(z) + s.dot(w)) / static_cast<double>(2 * n);

    const Vector d = ((z.array() / a.array()) + (w.array() / s.array())).inverse().matrix();
    const Matrix m = x.transpose() * d.asDiagonal() * x;
    const Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) break;

    auto solve_direction = [&](const Vector& r_az, const Vector& r_sw, Vector& da, Vector& dl,
                               Vector& dz, Vector& dw) {
      const Vector g = rc.array() - r_az.array() / a.array() + r_sw.array() / s.array();
      dl = llt.solve(rb + x.transpose() * d.cwiseProduct(g));
      da = d.cwiseProduct(x * dl - g);
      dz = (r_az.array() - z.array() * da.array()) / a.array();
      dw = (r_sw.array() + w.array() * da.array()) / s.array();
    };

    Vector da, dl, dz, dw;
    solve_direction(-a.cwiseProduct(z), -s.cwiseProduct(w), da, dl, dz, dw);
    double alpha_p = std::min(1.0, std::min(step_to_boundary(a, da), step_to_boundary(s, -da)));
    double alpha_d = std::min(1.0, std::min(step_to_boundary(z, dz), step_to_boundary(w, dw)));

    const double mu_aff = ((a + alpha_p * da).dot(z + alpha_d * dz) +
                           (s - alpha_p * da).dot(w + alpha_d * dw)) /
                          static_cast<double>(2 * n);
    const double sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);

    const Vector r_az = (sigma * mu - a.array() * z.array() - da.array() * dz.array()).matrix();
    const Vector r_sw = (sigma * mu - s.array() * w.array() + da.array() * dw.array()).matrix();
    solve_direction(r_az, r_sw, da, dl, dz, dw);

    alpha_p = std::min(1.0, eta * std::min(step_to_boundary(a, da), step_to_boundary(s, -da)));
    alpha_d = std::min(1.0, eta * std::min(step_to_boundary(z, dz), step_to_boundary(w, dw)));
    if (!(alpha_p > 0.0) || !(alpha_d > 0.0) || !da.allFinite() || !dl.allFinite()) break;

    a += alpha_p * da;
    s -= alpha_p * da;
    lambda += alpha_d * dl;
    z += alpha_d * dz;
    w += alpha_d * dw;
  }
  result.certified = certify();
  return result;
}

struct VertexResult {
  Vector beta;
  double objective = 0.0;
  int pivots = 0;
  bool optimal = false;
};

// Picks p linearly independent rows, preferring those listed first in `order`.
inline std::optional<std::vector<Eigen::Index>> choose_basis(const Matrix& x,
                                                             const std::vector<Eigen::Index>& order) {
  const Eigen::Index p = x.cols();
  std::vector<Eigen::Index> basis;
  Matrix rows(0, p);
  for (const Eigen::Index i : order) {
    Matrix trial(rows.rows() + 1, p);
    trial.topRows(rows.rows()) = rows;
    trial.row(rows.rows()) = x.row(i);
    Eigen::FullPivLU<Matrix> lu(trial);
    lu.setThreshold(1e-10);
    if (lu.rank() == trial.rows()) {
      rows = std::move(trial);
      basis.push_back(i);
      if (static_cast<Eigen::Index>(basis.size()) == p) return basis;
    }
  }
  return std::nullopt;
}

inline std::optional<VertexResult> vertex_descent(const Matrix& x, const Vector& y, double tau,
                                                  const Vector& start, int max_pivots) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  Vector r = y - x * start;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return std::abs(r(i)) < std::abs(r(j)); });
  auto chosen = choose_basis(x, order);
  if (!chosen) return std::nullopt;
  std::vector<Eigen::Index> basis = std::move(*chosen);

  const double zero_tol = 1e-12 * (1.0 + y.cwiseAbs().maxCoeff());
  std::vector<char> is_basic(static_cast<std::size_t>(n), 0);

  VertexResult out;
  double previous = std::numeric_limits<double>::infinity();
  struct Kink {
    double t;
    double weight;
    Eigen::Index row;
  };
  std::vector<Kink> kinks;
  kinks.reserve(static_cast<std::size_t>(n));

  for (int pivot = 0; pivot <= max_pivots; ++pivot) {
    Matrix b(p, p);
    Vector yb(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      b.row(k) = x.row(basis[static_cast<std::size_t>(k)]);
      yb(k) = y(basis[static_cast<std::size_t>(k)]);
    }
    const Eigen::PartialPivLU<Matrix> lu(b);
    const Vector beta = lu.solve(yb);
    r = y - x * beta;
    std::fill(is_basic.begin(), is_basic.end(), 0);
    for (const Eigen::Index k : basis) {
      r(k) = 0.0;
      is_basic[static_cast<std::size_t>(k)] = 1;
    }
    const double objective = check_loss_sum(r, tau);
    if (!(objective < previous) && pivot > 0) {
      // Degenerate stall: report the last strictly improving vertex.
      out.optimal = false;
      return out;
    }
    previous = objective;
    out.beta = beta;
    out.objective = objective;
    out.pivots = pivot;

    const Matrix v = x * lu.inverse();  // column j: residual change per unit step on edge j

    double best_slope = 0.0;
    Eigen::Index best_j = -1;
    double best_sign = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (const double sign : {1.0, -1.0}) {
        double slope = 0.0;
        double scale = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          double vi = 0.0;
          if (is_basic[static_cast<std::size_t>(i)]) {
            if (i != basis[static_cast<std::size_t>(j)]) continue;
            vi = sign;
          } else {
            vi = sign * v(i, j);
          }
          scale += std::abs(vi);
          const double ri = r(i);
          if (ri > zero_tol) slope -= vi * tau;
          else if (ri < -zero_tol) slope += vi * (1.0 - tau);
          else slope += vi < 0.0 ? -vi * tau : vi * (1.0 - tau);
        }
        if (slope < best_slope && slope < -1e-12 * (1.0 + scale)) {
          best_slope = slope;
          best_j = j;
          best_sign = sign;
        }
      }
    }
    if (best_j < 0) {
      out.optimal = true;
      return out;
    }

    kinks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (is_basic[static_cast<std::size_t>(i)]) continue;
      const double vi = best_sign * v(i, best_j);
      const double ri = r(i);
      if (std::abs(ri) <= zero_tol || vi == 0.0) continue;
      const double t = ri / vi;
      if (t > 0.0) kinks.push_back({t, std::abs(vi), i});
    }
    std::sort(kinks.begin(), kinks.end(),
              [](const Kink& l, const Kink& rr) { return l.t < rr.t || (l.t == rr.t && l.row < rr.row); });
    double slope = best_slope;
    Eigen::Index entering = -1;
    for (const auto& k : kinks) {
      slope += k.weight;
      if (slope >= 0.0) {
        entering = k.row;
        break;
      }
    }
    if (entering < 0) return out;  // unbounded direction; cannot happen for full-rank X
    basis[static_cast<std::size_t>(best_j)] = entering;
  }
  return out;
}

}  // namespace detail

/// Weighted linear quantile regression at level tau. The returned objective is
/// sum_i w_i rho_tau(y_i - x_i' beta) at the returned coefficients.
inline FitResult fit_quantile_reg(const DesignMatrix& design, std::span<const double> y, double tau,
                                  std::span<const double> weights = {},
                                  const QuantRegOptions& options = {}) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ValidationError("fit_quantile_reg: tau must lie in (0, 1), got " + std::to_string(tau));
  }
  const std::size_t n = design.rows();
  if (y.size() != n) throw ValidationError("fit_quantile_reg: response length mismatch");
  if (!weights.empty() && weights.size() != n) {
    throw ValidationError("fit_quantile_reg: weight length mismatch");
  }

  std::vector<Eigen::Index> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i])) throw ValidationError("fit_quantile_reg: non-finite response");
    if (!weights.empty()) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
        throw InvalidWeightsError("fit_quantile_reg: weights must be finite and nonnegative");
      }
      if (weights[i] == 0.0) continue;
    }
    kept.push_back(static_cast<Eigen::Index>(i));
  }
  if (kept.empty()) throw InvalidWeightsError("fit_quantile_reg: all weights are zero");

  const auto m = static_cast<Eigen::Index>(kept.size());
  const auto p = static_cast<Eigen::Index>(design.cols());
  Matrix x(m, p);
  Vector target(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = kept[static_cast<std::size_t>(k)];
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    x.row(k) = w * design.values().row(i);
    target(k) = w * y[static_cast<std::size_t>(i)];
  }
  detail::require_full_rank(x, design.labels(), "fit_quantile_reg");

  const auto ipm = detail::frisch_newton(x, target, tau, options);
  const int max_pivots = options.max_pivots > 0 ? options.max_pivots : static_cast<int>(10 * (m + p));
  Vector start = ipm.beta.size() == p ? ipm.beta : Vector(x.colPivHouseholderQr().solve(target));
  const auto vertex = detail::vertex_descent(x, target, tau, start, max_pivots);

  FitResult fit;
  fit.iterations = ipm.iterations;
  fit.coefficients = ipm.beta;
  fit.objective = ipm.objective;
  if (vertex && vertex->beta.size() == p && vertex->objective <= ipm.objective) {
    fit.coefficients = vertex->beta;
    fit.objective = vertex->objective;
    fit.iterations += vertex->pivots;
  }
  const bool certified = ipm.certified || (vertex && vertex->optimal) ||
                         fit.objective - ipm.lower_bound <=
                             options.gap_tolerance * std::max(1.0, std::abs(fit.objective));
  if (!certified || fit.coefficients.size() != p) {
    throw ConvergenceError("fit_quantile_reg: solver did not reach a certified optimum",
                           {{fit.iterations, fit.objective, fit.objective - ipm.lower_bound}});
  }
  fit.converged = true;
  return fit;
}

}  // namespace medeff
