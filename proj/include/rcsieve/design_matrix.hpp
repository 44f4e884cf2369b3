#pragma once

#include "rcsieve/basis.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace rcsieve {

/// How to build the sieve for a given sample.
struct ModelSpec {
  BasisFamily family = BasisFamily::polynomial;
  int order = 2;
  /// Interior B-spline knots shared by every regressor; empty means uniform.
  std::vector<double> knots;
  /// Per-regressor basis support. Empty means the empirical range of each
  /// regressor in the estimation sample.
  std::vector<Interval> domains;
  bool rescale = true;
  double rank_tol = kDefaultRankTolerance;
  /// Basis for the control coefficients c(X); defaults to family/order above.
  std::optional<BasisFamily> control_family;
  std::optional<int> control_order;
};

struct LabeledMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> labels;
};

/// Everything the estimator needs: Y, the parametric block W (and optional
/// controls Z), the sieve block S and, with controls, the block for
/// Z * c(X). The constrained bases are kept so the fitted functions can be
/// evaluated anywhere in the domain.
struct DesignMatrices {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::string> x_labels;
  Eigen::MatrixXd w;
  std::vector<std::string> w_labels;
  SieveBlock s;
  std::optional<Eigen::MatrixXd> z;
  std::vector<std::string> z_labels;
  std::optional<SieveBlock> z_sieve;

  std::vector<ConstrainedBasis> bases;          // same order as s.layout
  std::vector<ConstrainedBasis> control_bases;  // one per regressor
  std::vector<Interval> domains;
  ModelSpec spec;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }
  Eigen::Index q() const { return z ? z->cols() : 0; }

  /// [W, Z]
  Eigen::MatrixXd parametric() const;
  std::vector<std::string> parametric_labels() const;
  /// [S, Z-sieve]
  Eigen::MatrixXd nonparametric() const;
  Eigen::Index nonparametric_width() const;

  /// Rows of [W, Z] and [S, Z-sieve] for new data, using this design's
  /// constrained bases. `z_new` must be given iff the design has controls.
  Eigen::MatrixXd parametric_rows(const Eigen::MatrixXd& x_new,
                                  const std::optional<Eigen::MatrixXd>& z_new) const;
  Eigen::MatrixXd nonparametric_rows(const Eigen::MatrixXd& x_new,
                                     const std::optional<Eigen::MatrixXd>& z_new) const;
};

/// Raw estimation sample: response, regressors and optional controls.
struct SampleData {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::optional<Eigen::MatrixXd> z;
  std::vector<std::string> x_labels;
  std::vector<std::string> z_labels;

  Eigen::Index n() const { return y.size(); }
  SampleData subset(const std::vector<Eigen::Index>& rows) const;
};

std::vector<std::string> default_labels(const std::string& stem, Eigen::Index count);

/// [1, X_1..X_p, X_1 X_2, X_1 X_3, ..., X_{p-1} X_p] with labels.
/// Throws DataError on non-finite input.
LabeledMatrix build_w(const Eigen::MatrixXd& x, const std::vector<std::string>& x_labels = {});

/// Throws CollinearityError naming the first column that is (numerically)
/// a linear combination of the preceding ones.
void require_full_column_rank(const Eigen::MatrixXd& m, const std::vector<std::string>& labels,
                              double tol = 1e-10);

/// Domains used when ModelSpec::domains is empty: the sample range.
std::vector<Interval> empirical_domains(const Eigen::MatrixXd& x);

/// Design without controls.
DesignMatrices build_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                            const ModelSpec& spec, const std::vector<std::string>& x_labels = {});

/// Design with controls Z entering both linearly and through centered
/// coefficient functions c(X). With an empty Z this is build_design.
DesignMatrices build_control_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                    const Eigen::MatrixXd& z, const ModelSpec& spec,
                                    const std::vector<std::string>& x_labels = {},
                                    const std::vector<std::string>& z_labels = {});

/// build_design or build_control_design depending on whether the sample
/// carries controls.
DesignMatrices build_design(const SampleData& data, const ModelSpec& spec);

}  // namespace rcsieve
