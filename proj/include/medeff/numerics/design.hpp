#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "medeff/error.hpp"

namespace medeff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Regressor matrix with labelled columns. Column 0 is the intercept.
class DesignMatrix {
public:
  DesignMatrix() = default;

  DesignMatrix(Matrix values, std::vector<std::string> labels)
      : values_(std::move(values)), labels_(std::move(labels)) {
    if (static_cast<std::size_t>(values_.cols()) != labels_.size()) {
      throw ValidationError("DesignMatrix: label count does not match column count");
    }
    if (values_.cols() == 0) throw ValidationError("DesignMatrix: no columns");
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (values_(i, 0) != 1.0) throw ValidationError("DesignMatrix: first column must be the intercept");
    }
    for (Eigen::Index j = 1; j < values_.cols(); ++j) {
      if (values_.rows() > 0 && values_.col(j).cwiseAbs().maxCoeff() == 0.0) {
        throw SingularDesignError("DesignMatrix: column '" + labels_[static_cast<std::size_t>(j)] +
                                      "' is identically zero",
                                  {labels_[static_cast<std::size_t>(j)]});
      }
    }
  }

  /// Prediction-only design (e.g. exposure forced to a constant); skips the
  /// zero-column check, keeps the intercept check.
  static DesignMatrix unchecked(Matrix values, std::vector<std::string> labels) {
    DesignMatrix out;
    if (static_cast<std::size_t>(values.cols()) != labels.size()) {
      throw ValidationError("DesignMatrix: label count does not match column count");
    }
    out.values_ = std::move(values);
    out.labels_ = std::move(labels);
    return out;
  }

  /// Intercept-only design with n rows.
  static DesignMatrix intercept(std::size_t n) {
    return DesignMatrix(Matrix::Ones(static_cast<Eigen::Index>(n), 1), {"(Intercept)"});
  }

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  const Matrix& values() const noexcept { return values_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::optional<std::size_t> column(const std::string& label) const {
    for (std::size_t j = 0; j < labels_.size(); ++j) {
      if (labels_[j] == label) return j;
    }
    return std::nullopt;
  }

private:
  Matrix values_;
  std::vector<std::string> labels_;
};

struct FitResult {
  Vector coefficients;
  std::optional<double> residual_scale;  // linear fits only
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;  // RSS, negative log-likelihood or check loss
};

}  // namespace medeff
