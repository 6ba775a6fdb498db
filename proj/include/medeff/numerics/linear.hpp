#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "medeff/error.hpp"
#include "medeff/numerics/design.hpp"
#include "medeff/numerics/distributions.hpp"

namespace medeff {

namespace detail {

inline std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (const auto& l : labels) {
    if (!out.empty()) out += ", ";
    out += l;
  }
  return out;
}

// Throws SingularDesignError naming the columns that pivoted QR leaves outside
// the numerical column space.
inline void require_full_rank(const Matrix& x, const std::vector<std::string>& labels,
                              const char* who) {
  if (x.rows() < x.cols()) {
    throw SingularDesignError(std::string(who) + ": fewer rows than columns", labels);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() == x.cols()) return;
  std::vector<std::string> collinear;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = qr.rank(); k < x.cols(); ++k) {
    collinear.push_back(labels[static_cast<std::size_t>(perm(k))]);
  }
  throw SingularDesignError(std::string(who) + ": rank-deficient design; collinear columns: " +
                                join_labels(collinear),
                            collinear);
}

inline Vector to_vector(std::span<const double> v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

/// (Weighted) least squares. residual_scale is sqrt(RSS / (n - p)) with RSS the
/// weighted residual sum of squares; zero when n == p.
inline FitResult fit_ols(const DesignMatrix& design, std::span<const double> y,
                         std::span<const double> weights = {}) {
  const auto n = static_cast<Eigen::Index>(design.rows());
  const auto p = static_cast<Eigen::Index>(design.cols());
  if (static_cast<Eigen::Index>(y.size()) != n) throw ValidationError("fit_ols: response length mismatch");
  if (!weights.empty() && static_cast<Eigen::Index>(weights.size()) != n) {
    throw ValidationError("fit_ols: weight length mismatch");
  }

  Matrix x = design.values();
  Vector target = detail::to_vector(y);
  if (!weights.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = weights[static_cast<std::size_t>(i)];
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidWeightsError("fit_ols: invalid weight");
      const double s = std::sqrt(w);
      x.row(i) *= s;
      target(i) *= s;
    }
  }
  detail::require_full_rank(x, design.labels(), "fit_ols");

  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  FitResult fit;
  fit.coefficients = qr.solve(target);
  const double rss = (target - x * fit.coefficients).squaredNorm();
  fit.objective = rss;
  fit.residual_scale = n > p ? std::sqrt(rss / static_cast<double>(n - p)) : 0.0;
  fit.converged = true;
  fit.iterations = 1;
  return fit;
}

struct LogisticOptions {
  int max_iterations = 100;
  double coefficient_tolerance = 1e-8;
  double loglik_tolerance = 1e-10;
  // Linear predictors beyond this magnitude are treated as diverging.
  double max_linear_predictor = 700.0;
  // -loglik below this (per record) means the outcome is perfectly separated.
  double separation_loglik = 1e-9;
};

/// Bernoulli maximum likelihood by damped Newton-Raphson (IRLS).
inline FitResult fit_logistic(const DesignMatrix& design, std::span<const double> outcome,
                              const LogisticOptions& options = {}) {
  const auto n = static_cast<Eigen::Index>(design.rows());
  const auto p = static_cast<Eigen::Index>(design.cols());
  if (static_cast<Eigen::Index>(outcome.size()) != n) {
    throw ValidationError("fit_logistic: response length mismatch");
  }
  bool has_zero = false;
  bool has_one = false;
  for (const double v : outcome) {
    if (v == 0.0) has_zero = true;
    else if (v == 1.0) has_one = true;
    else throw ValidationError("fit_logistic: response must be binary (0/1)");
  }
  if (!has_zero || !has_one) throw ValidationError("fit_logistic: response needs both 0 and 1 values");

  const Matrix& x = design.values();
  detail::require_full_rank(x, design.labels(), "fit_logistic");
  const Vector a = detail::to_vector(outcome);

  auto loglik = [&](const Vector& beta) {
    const Vector eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ll += a(i) * eta(i) - softplus(eta(i));
    return ll;
  };

  Vector beta = Vector::Zero(p);
  double ll = loglik(beta);
  std::vector<IterationRecord> trace;
  trace.push_back({0, -ll, 0.0});

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Vector eta = x * beta;
    Vector prob(n);
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = expit(eta(i));
      w(i) = prob(i) * (1.0 - prob(i));
    }
    const Vector score = x.transpose() * (a - prob);
    const Matrix info = x.transpose() * w.asDiagonal() * x;
    const Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success) {
      throw ConvergenceError("fit_logistic: information matrix is singular", trace);
    }
    Vector step = ldlt.solve(score);

    // Step halving keeps the log-likelihood monotone.
    double step_scale = 1.0;
    Vector candidate = beta + step;
    double ll_new = loglik(candidate);
    for (int halving = 0; halving < 30 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++halving) {
      step_scale *= 0.5;
      candidate = beta + step_scale * step;
      ll_new = loglik(candidate);
    }
    const double max_step = (candidate - beta).cwiseAbs().maxCoeff();
    const double ll_change = std::abs(ll_new - ll);
    beta = candidate;
    ll = ll_new;
    trace.push_back({iter, -ll, max_step});

    if (!std::isfinite(ll) || !beta.allFinite()) {
      throw ConvergenceError("fit_logistic: non-finite coefficients", trace);
    }
    if ((x * beta).cwiseAbs().maxCoeff() > options.max_linear_predictor) {
      throw ConvergenceError("fit_logistic: coefficients diverging", trace);
    }
    if (-ll < options.separation_loglik * static_cast<double>(n)) {
      throw ConvergenceError(
          "fit_logistic: complete separation (fitted probabilities reach 0 or 1)", trace);
    }
    // A flat log-likelihood with large Newton steps is the signature of
    // separation, not convergence.
    const bool flat = ll_change < options.loglik_tolerance && max_step < 1e-4;
    if (max_step < options.coefficient_tolerance || flat) {
      FitResult fit;
      fit.coefficients = beta;
      fit.converged = true;
      fit.iterations = iter;
      fit.objective = -ll;
      return fit;
    }
  }
  throw ConvergenceError("fit_logistic: no convergence within iteration cap", trace);
}

}  // namespace medeff
