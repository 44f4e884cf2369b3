#pragma once

#include "rcsieve/design_matrix.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace rcsieve {

struct FitOptions {
  /// Eigenvalues of P_n = S'S/n below ginv_tol * lambda_max are zeroed in
  /// the generalized inverse.
  double ginv_tol = 1e-10;
  /// Phi_n is declared singular when lambda_min <= ident_tol * lambda_max.
  double ident_tol = 1e-12;
  /// Multiply the sandwich by n / (n - #parameters) when true.
  bool dof_correction = false;
};

struct FitResult {
  Eigen::VectorXd delta_hat;
  std::vector<std::string> delta_labels;
  Eigen::VectorXd pi_hat;
  int order = 0;  // basis order K
  Eigen::MatrixXd vcov_delta;
  Eigen::VectorXd residuals;
  Eigen::VectorXd fitted;
  Eigen::Index rank_s = 0;
  /// Squared residuals, the plug-in for sigma^2(X_i).
  Eigen::VectorXd sigma2_hat;

  Eigen::VectorXd standard_errors() const { return vcov_delta.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

/// Factorization of one design, reused for many responses (bootstrap
/// draws). Profiling out the sieve block uses the SVD of S / sqrt(n), which
/// gives the spectral generalized inverse of P_n without forming S'S.
class ProfileSolver {
 public:
  explicit ProfileSolver(const DesignMatrices& design, FitOptions options = {});

  struct Coefficients {
    Eigen::VectorXd delta;
    Eigen::VectorXd pi;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
  };
  Coefficients solve(const Eigen::VectorXd& y) const;

  /// W - S P_n^- S'W / n: the parametric block with its projection on the
  /// sieve space removed.
  const Eigen::MatrixXd& w_tilde() const { return w_tilde_; }
  Eigen::Index sieve_rank() const { return rank_; }
  Eigen::Index rows() const { return w_.rows(); }

 private:
  Eigen::MatrixXd w_;
  Eigen::MatrixXd s_;
  Eigen::MatrixXd u_;       // n x r
  Eigen::VectorXd sigma_;   // r singular values of S / sqrt(n)
  Eigen::MatrixXd v_;       // m x r
  Eigen::MatrixXd w_tilde_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> w_tilde_qr_;
  Eigen::Index rank_ = 0;
};

/// Profiled least squares for delta and pi with the sandwich covariance of
/// delta. Throws IdentificationError when Phi_n is singular.
FitResult profile_fit(const DesignMatrices& design, const FitOptions& options = {});

struct SandwichPieces {
  Eigen::MatrixXd phi_hat;
  Eigen::MatrixXd omega_hat;
  Eigen::MatrixXd w_tilde;
};

struct SandwichResult {
  SandwichPieces pieces;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
};

/// Phi^-1 Omega Phi^-1 / n using fit.residuals as the heteroskedasticity
/// weights.
SandwichResult sandwich_vcov(const FitResult& fit, const DesignMatrices& design,
                             const FitOptions& options = {});

/// Same computation from explicit pieces; `u2` holds the weights U_i^2.
SandwichResult sandwich_from(const Eigen::MatrixXd& w_tilde, const Eigen::VectorXd& u2,
                             Eigen::Index n_parameters, const FitOptions& options = {});

struct FunctionComponent {
  std::string label;
  bool control = false;
  int target = 0;    // j' (or control index q)
  int argument = 0;  // j
  Eigen::VectorXd values;
  std::optional<Eigen::VectorXd> lower;
  std::optional<Eigen::VectorXd> upper;
};

/// Fitted coefficient functions on a set of points. `components` holds
/// b*_{j',j} for every pair (then c_{q,j} with controls); `aggregates`
/// holds b*_{j'} = sum_j b*_{j',j} (then c_q).
struct FunctionEstimate {
  Eigen::MatrixXd points;
  std::vector<FunctionComponent> components;
  std::vector<FunctionComponent> aggregates;

  const FunctionComponent* find(const std::string& label) const;
};

/// Evaluate b* (and c) at `points` (m x p). Throws DomainError outside the
/// basis domains.
FunctionEstimate evaluate_b(const Eigen::VectorXd& pi_hat, const DesignMatrices& design,
                            const Eigen::MatrixXd& points);
inline FunctionEstimate evaluate_b(const FitResult& fit, const DesignMatrices& design,
                                   const Eigen::MatrixXd& points) {
  return evaluate_b(fit.pi_hat, design, points);
}

/// Points along one regressor with the others held at their sample means.
Eigen::MatrixXd curve_points(const DesignMatrices& design, int argument, const Eigen::VectorXd& grid);

/// Equispaced grid of `count` points on [lo, hi].
Eigen::VectorXd linspace(double lo, double hi, Eigen::Index count);

/// Fitted conditional mean W delta + S pi at new points.
Eigen::VectorXd predict(const FitResult& fit, const DesignMatrices& design,
                        const Eigen::MatrixXd& x_new,
                        const std::optional<Eigen::MatrixXd>& z_new = std::nullopt);

}  // namespace rcsieve
