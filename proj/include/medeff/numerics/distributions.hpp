#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "medeff/error.hpp"

namespace medeff {

/// Logistic inverse link 1 / (1 + e^-x); evaluated on the branch that cannot overflow.
inline double expit(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double normal_pdf(double x, double mean, double sd) {
  if (!(sd > 0.0)) throw DomainError("normal_pdf: sd must be positive");
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double lognormal_pdf(double y, double mu, double sigma) {
  if (!(y > 0.0)) throw DomainError("lognormal_pdf: y must be positive, got " + std::to_string(y));
  if (!(sigma > 0.0)) throw DomainError("lognormal_pdf: sigma must be positive");
  const double z = (std::log(y) - mu) / sigma;
  return std::exp(-0.5 * z * z) / (y * sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace medeff
