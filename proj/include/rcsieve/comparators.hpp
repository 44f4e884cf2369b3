#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace rcsieve {

enum class ComparatorMethod { ols, control_function };

std::string to_string(ComparatorMethod m);

struct ComparatorFit {
  ComparatorMethod method = ComparatorMethod::ols;
  Eigen::VectorXd coefficients;
  std::vector<std::string> labels;
  /// Heteroskedasticity-consistent (HC0) covariance and standard errors.
  Eigen::MatrixXd vcov;
  Eigen::VectorXd robust_se;
  Eigen::VectorXd residuals;
  /// Control function only: first-stage (intercept, slope) and its R^2.
  std::optional<Eigen::VectorXd> first_stage;
  double first_stage_r2 = 0.0;

  double coefficient(const std::string& label) const;
  double standard_error(const std::string& label) const;
};

/// Least squares of y on the given columns with HC0 standard errors.
/// Throws CollinearityError when the columns are rank deficient.
ComparatorFit fit_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& columns,
                      const std::vector<std::string>& labels = {});

/// OLS of y on [1, x].
ComparatorFit fit_ols_simple(const Eigen::VectorXd& y, const Eigen::VectorXd& x);

/// Two-step control function for a scalar endogenous x and scalar
/// instrument: v = residual of x on (1, instrument), then y on
/// (1, x, v, x*v). Throws WeakInstrumentError on a zero first-stage slope.
ComparatorFit fit_control_function(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& instrument);

}  // namespace rcsieve
