#include "rcsieve/estimator.hpp"

#include "rcsieve/errors.hpp"

#include <cmath>
#include <sstream>

namespace rcsieve {

ProfileSolver::ProfileSolver(const DesignMatrices& design, FitOptions options)
    : w_(design.parametric()), s_(design.nonparametric()) {
  const auto n = static_cast<double>(w_.rows());
  if (w_.rows() <= w_.cols() + s_.cols()) {
    std::ostringstream os;
    os << "need n > width(W, Z) + width(S): n=" << w_.rows() << ", widths " << w_.cols() << " + "
       << s_.cols();
    throw ShapeError(os.str());
  }

  if (s_.cols() > 0) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(s_ / std::sqrt(n), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double lambda_max = sv.size() > 0 ? sv(0) * sv(0) : 0.0;
    while (rank_ < sv.size() && sv(rank_) * sv(rank_) > options.ginv_tol * lambda_max) ++rank_;
    u_ = svd.matrixU().leftCols(rank_);
    v_ = svd.matrixV().leftCols(rank_);
    sigma_ = sv.head(rank_);
  } else {
    u_.resize(w_.rows(), 0);
    v_.resize(0, 0);
  }

  w_tilde_ = w_ - u_ * (u_.transpose() * w_);
  const Eigen::MatrixXd phi = w_tilde_.transpose() * w_tilde_ / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(phi, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= options.ident_tol * hi) {
    std::ostringstream os;
    os << "parametric block is not identified after profiling out the sieve (eigenvalue ratio "
       << (hi > 0.0 ? lo / hi : 0.0) << ")";
    throw IdentificationError(os.str());
  }
  w_tilde_qr_.compute(w_tilde_);
}

ProfileSolver::Coefficients ProfileSolver::solve(const Eigen::VectorXd& y) const {
  if (y.size() != w_.rows()) throw ShapeError("response length does not match the design");
  const double root_n = std::sqrt(static_cast<double>(w_.rows()));
  Coefficients out;
  // W~'W~ delta = W~'Y; W~ is orthogonal to the sieve span so M_S Y is not needed.
  out.delta = w_tilde_qr_.solve(y);
  const Eigen::VectorXd partial = y - w_ * out.delta;
  if (rank_ > 0) {
    out.pi = v_ * ((u_.transpose() * partial).cwiseQuotient(sigma_) / root_n);
  } else {
    out.pi = Eigen::VectorXd::Zero(s_.cols());
  }
  out.fitted = w_ * out.delta + s_ * out.pi;
  out.residuals = y - out.fitted;
  return out;
}

SandwichResult sandwich_from(const Eigen::MatrixXd& w_tilde, const Eigen::VectorXd& u2,
                             Eigen::Index n_parameters, const FitOptions& options) {
  const auto n = static_cast<double>(w_tilde.rows());
  SandwichResult out;
  out.pieces.w_tilde = w_tilde;
  out.pieces.phi_hat = w_tilde.transpose() * w_tilde / n;
  out.pieces.omega_hat = w_tilde.transpose() * u2.asDiagonal() * w_tilde / n;
  out.pieces.phi_hat = 0.5 * (out.pieces.phi_hat + out.pieces.phi_hat.transpose()).eval();
  out.pieces.omega_hat = 0.5 * (out.pieces.omega_hat + out.pieces.omega_hat.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.pieces.phi_hat);
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || eig.eigenvalues().minCoeff() <= options.ident_tol * hi) {
    throw IdentificationError("Phi is singular; sandwich covariance undefined");
  }
  const Eigen::MatrixXd phi_inv = eig.eigenvectors() *
                                  eig.eigenvalues().cwiseInverse().asDiagonal() *
                                  eig.eigenvectors().transpose();
  out.vcov = phi_inv * out.pieces.omega_hat * phi_inv / n;
  if (options.dof_correction) {
    const double dof = n - static_cast<double>(n_parameters);
    if (dof <= 0) throw ShapeError("no residual degrees of freedom for the correction");
    out.vcov *= n / dof;
  }
  out.vcov = 0.5 * (out.vcov + out.vcov.transpose()).eval();
  out.se = out.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

SandwichResult sandwich_vcov(const FitResult& fit, const DesignMatrices& design,
                             const FitOptions& options) {
  if (fit.residuals.size() != design.n()) throw ShapeError("residuals do not match the design");
  const ProfileSolver solver(design, options);
  return sandwich_from(solver.w_tilde(), fit.residuals.array().square().matrix(),
                       solver.w_tilde().cols() + solver.sieve_rank(), options);
}

FitResult profile_fit(const DesignMatrices& design, const FitOptions& options) {
  const ProfileSolver solver(design, options);
  const auto coef = solver.solve(design.y);
  FitResult fit;
  fit.delta_hat = coef.delta;
  fit.delta_labels = design.parametric_labels();
  fit.pi_hat = coef.pi;
  fit.order = design.spec.order;
  fit.residuals = coef.residuals;
  fit.fitted = coef.fitted;
  fit.rank_s = solver.sieve_rank();
  fit.sigma2_hat = coef.residuals.array().square();
  fit.vcov_delta = sandwich_from(solver.w_tilde(), fit.sigma2_hat,
                                 solver.w_tilde().cols() + solver.sieve_rank(), options)
                       .vcov;
  return fit;
}

const FunctionComponent* FunctionEstimate::find(const std::string& label) const {
  for (const auto& c : components) {
    if (c.label == label) return &c;
  }
  for (const auto& c : aggregates) {
    if (c.label == label) return &c;
  }
  return nullptr;
}

FunctionEstimate evaluate_b(const Eigen::VectorXd& pi_hat, const DesignMatrices& design,
                            const Eigen::MatrixXd& points) {
  if (pi_hat.size() != design.nonparametric_width()) {
    throw ShapeError("pi has the wrong length for this design");
  }
  if (points.cols() != design.p()) throw ShapeError("evaluation points need one column per regressor");
  const auto p = static_cast<int>(design.p());
  const Eigen::Index m = points.rows();

  FunctionEstimate out;
  out.points = points;
  for (int t = 0; t < p; ++t) {
    out.aggregates.push_back({"b[" + std::to_string(t + 1) + "]", false, t, -1,
                              Eigen::VectorXd::Zero(m), std::nullopt, std::nullopt});
  }
  for (std::size_t i = 0; i < design.bases.size(); ++i) {
    const auto& basis = design.bases[i];
    const auto& block = design.s.layout[i];
    Eigen::VectorXd values = Eigen::VectorXd::Zero(m);
    if (block.count > 0) values = basis.evaluate(points) * pi_hat.segment(block.begin, block.count);
    out.aggregates[block.target].values += values;
    out.components.push_back({"b[" + std::to_string(block.target + 1) + "," +
                                  std::to_string(block.argument + 1) + "]",
                              false, block.target, block.argument, std::move(values), std::nullopt,
                              std::nullopt});
  }

  if (design.z_sieve) {
    const Eigen::Index offset = design.s.cols();
    const auto q = static_cast<int>(design.q());
    for (int c = 0; c < q; ++c) {
      out.aggregates.push_back({"c[" + design.z_labels[c] + "]", true, c, -1,
                                Eigen::VectorXd::Zero(m), std::nullopt, std::nullopt});
    }
    std::vector<Eigen::MatrixXd> evaluated;
    for (const auto& basis : design.control_bases) evaluated.push_back(basis.evaluate(points));
    for (const auto& block : design.z_sieve->layout) {
      Eigen::VectorXd values = Eigen::VectorXd::Zero(m);
      if (block.count > 0) {
        values = evaluated[block.argument] * pi_hat.segment(offset + block.begin, block.count);
      }
      out.aggregates[p + block.target].values += values;
      out.components.push_back({"c[" + design.z_labels[block.target] + "," +
                                    std::to_string(block.argument + 1) + "]",
                                true, block.target, block.argument, std::move(values),
                                std::nullopt, std::nullopt});
    }
  }
  return out;
}

Eigen::VectorXd linspace(double lo, double hi, Eigen::Index count) {
  if (count == 1) return Eigen::VectorXd::Constant(1, lo);
  return Eigen::VectorXd::LinSpaced(count, lo, hi);
}

Eigen::MatrixXd curve_points(const DesignMatrices& design, int argument, const Eigen::VectorXd& grid) {
  if (argument < 0 || argument >= design.p()) throw ShapeError("curve argument out of range");
  Eigen::MatrixXd pts(grid.size(), design.p());
  for (Eigen::Index j = 0; j < design.p(); ++j) pts.col(j).setConstant(design.x.col(j).mean());
  pts.col(argument) = grid;
  return pts;
}

Eigen::VectorXd predict(const FitResult& fit, const DesignMatrices& design,
                        const Eigen::MatrixXd& x_new, const std::optional<Eigen::MatrixXd>& z_new) {
  return design.parametric_rows(x_new, z_new) * fit.delta_hat +
         design.nonparametric_rows(x_new, z_new) * fit.pi_hat;
}

}  // namespace rcsieve
