#pragma once

// Raw and constrained sieve bases.
//
// A functional coefficient b*_{j',j}(x_j) is approximated by a linear
// combination of basis functions of the regressor x_j. The raw functions are
// transformed so that, on the construction sample, every constrained column
// is orthogonal to the ones column and to every regressor x_m with m != j'.
// The transformation residualizes the raw columns on those constraint
// columns, so the constrained function of a point xi is
//
//     psi~(xi) = psi(xi_j) * raw_map - [1, xi_{m != j'}] * constraint_coef.
//
// For p = 1 this is plain centering. Multiplying psi~ by x_{j'} only adds
// columns that already live in the parametric block W (x_{j'} and the
// interactions x_{j'} x_m), so the joint column space of [W, S] is unchanged.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rcsieve {

enum class BasisFamily { polynomial, bspline };

std::string to_string(BasisFamily family);
BasisFamily parse_basis_family(const std::string& name);

struct Interval {
  double lo = -1.0;
  double hi = 1.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
};

/// Family, order K and support of the raw basis for one regressor.
///
/// For polynomials K is the degree and the columns are x, x^2, ..., x^K.
/// For B-splines K is the number of returned columns: the full spline space
/// has K + 1 functions (a partition of unity) and the first one is dropped
/// because the intercept lives in W. The spline degree is min(3, K); when
/// `knots` is empty, K - degree interior knots are placed uniformly.
struct BasisSpec {
  BasisFamily family = BasisFamily::polynomial;
  int order = 2;
  std::vector<double> knots;
  Interval domain;

  int spline_degree() const;
  /// Interior knots actually used (given or uniform).
  std::vector<double> interior_knots() const;
  void validate() const;
};

/// Evaluate the raw basis (n x K). Throws DomainError when a point falls
/// outside `spec.domain` and EmptyInputError on empty input.
Eigen::MatrixXd build_raw_basis(const BasisSpec& spec, std::span<const double> x);
Eigen::MatrixXd build_raw_basis(const BasisSpec& spec, const Eigen::VectorXd& x);

/// Full B-spline basis (n x (K + 1)) before the first column is dropped.
Eigen::MatrixXd bspline_full_basis(const BasisSpec& spec, std::span<const double> x);

/// Moment constraints for the pair (target j', argument j), 0-based.
///
/// `columns` holds the sample constraint columns: ones first, then x_m for
/// every m != target in increasing m. `regressors` lists those m. A target
/// of -1 means centering only (used for control-variable coefficients).
struct ConstraintSet {
  int target = 0;
  int argument = 0;
  std::vector<int> regressors;
  Eigen::MatrixXd columns;

  static ConstraintSet for_pair(const Eigen::MatrixXd& x, int target, int argument);
  static ConstraintSet centering(Eigen::Index n, int argument = 0);

  bool structural_annihilation_possible() const {
    return target >= 0 && target != argument;
  }
  /// Constraint columns evaluated at arbitrary points (m x p).
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& points) const;
};

class ConstrainedBasis {
 public:
  ConstrainedBasis() = default;

  int target() const { return target_; }
  int argument() const { return argument_; }
  Eigen::Index effective_columns() const { return columns_.cols(); }
  Eigen::Index sample_size() const { return columns_.rows(); }
  Eigen::Index raw_columns() const { return raw_map_.rows(); }

  /// Maps raw columns to constrained columns (K x K_eff). Includes the
  /// column rescaling when the basis was built from a BasisSpec.
  const Eigen::MatrixXd& raw_map() const { return raw_map_; }
  /// Coefficients of the constraint columns removed from each kept column.
  const Eigen::MatrixXd& constraint_coef() const { return constraint_coef_; }
  const std::vector<int>& constraint_regressors() const { return regressors_; }
  /// Stacked [raw_map; -constraint_coef]: maps [raw, constraint columns]
  /// to the constrained columns.
  Eigen::MatrixXd projection_map() const;
  /// Indices of the raw columns that survived the rank screen.
  const std::vector<int>& kept() const { return kept_; }

  /// Constrained columns on the construction sample (n x K_eff).
  const Eigen::MatrixXd& columns() const { return columns_; }

  const std::optional<BasisSpec>& spec() const { return spec_; }

  /// psi~ at arbitrary points; `points` is m x p with column j holding the
  /// j-th coordinate. Requires a basis built through make_constrained_basis.
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& points) const;

 private:
  friend ConstrainedBasis constrain_basis(const Eigen::MatrixXd&, const ConstraintSet&, double);
  friend ConstrainedBasis make_constrained_basis(const BasisSpec&, const Eigen::MatrixXd&, int, int,
                                                 bool, double);

  int target_ = 0;
  int argument_ = 0;
  std::vector<int> regressors_;
  std::vector<int> kept_;
  Eigen::MatrixXd raw_map_;
  Eigen::MatrixXd constraint_coef_;
  Eigen::MatrixXd columns_;
  std::optional<BasisSpec> spec_;
};

inline constexpr double kDefaultRankTolerance = 1e-8;

/// Residualize raw columns on the constraint columns and drop the ones whose
/// residual norm falls below `rank_tol` times their original norm (or that
/// are linearly dependent on columns already kept).
///
/// Throws ShapeError on row mismatch or n <= K + #constraints, and
/// DegenerateBasisError when every column is annihilated for a pair where
/// that cannot be structural (diagonal pairs and centering-only sets).
ConstrainedBasis constrain_basis(const Eigen::MatrixXd& raw, const ConstraintSet& constraints,
                                 double rank_tol = kDefaultRankTolerance);

/// Raw basis of x.col(argument), optionally rescaled to unit sample standard
/// deviation, constrained for (target, argument). target == -1 gives a
/// centering-only basis.
ConstrainedBasis make_constrained_basis(const BasisSpec& spec, const Eigen::MatrixXd& x, int target,
                                        int argument, bool rescale = true,
                                        double rank_tol = kDefaultRankTolerance);

/// Column range of one (target, argument) block inside a sieve matrix.
/// For control-coefficient blocks `target` is the control index.
struct BlockLayout {
  int target = 0;
  int argument = 0;
  Eigen::Index begin = 0;
  Eigen::Index count = 0;
};

struct SieveBlock {
  Eigen::MatrixXd s;
  std::vector<BlockLayout> layout;

  Eigen::Index rows() const { return s.rows(); }
  Eigen::Index cols() const { return s.cols(); }
};

/// S(X) with blocks ordered by argument j, then target j'; block (j', j)
/// holds x_{j'} * psi~_{j'j}(x_j). Bases may come in any order but must
/// cover each pair exactly once. Throws ShapeError on row mismatch.
SieveBlock assemble_sieve_block(const Eigen::MatrixXd& x, std::span<const ConstrainedBasis> bases);

/// Same layout evaluated at new points (no sample-size check).
SieveBlock sieve_rows(const Eigen::MatrixXd& x, std::span<const ConstrainedBasis> bases);

/// Control block: column q of `z` times the centered basis of argument j,
/// ordered by control q then argument j. `bases` holds one basis per
/// argument.
SieveBlock control_sieve_rows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                              std::span<const ConstrainedBasis> bases);

}  // namespace rcsieve
