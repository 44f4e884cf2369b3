#include "rcsieve/basis.hpp"

#include "rcsieve/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace rcsieve {

std::string to_string(BasisFamily family) {
  return family == BasisFamily::polynomial ? "polynomial" : "bspline";
}

BasisFamily parse_basis_family(const std::string& name) {
  if (name == "polynomial" || name == "poly") return BasisFamily::polynomial;
  if (name == "bspline" || name == "b-spline") return BasisFamily::bspline;
  throw ConfigError("unknown basis family '" + name + "'");
}

int BasisSpec::spline_degree() const { return std::min(3, order); }

std::vector<double> BasisSpec::interior_knots() const {
  if (family != BasisFamily::bspline || !knots.empty()) return knots;
  const int count = order - spline_degree();
  std::vector<double> out;
  out.reserve(count);
  for (int i = 1; i <= count; ++i) {
    out.push_back(domain.lo + domain.width() * i / (count + 1));
  }
  return out;
}

void BasisSpec::validate() const {
  if (order < 1) throw ConfigError("basis order K must be >= 1");
  if (!std::isfinite(domain.lo) || !std::isfinite(domain.hi) || !(domain.lo < domain.hi)) {
    throw ConfigError("basis domain must be a finite interval with lo < hi");
  }
  if (family == BasisFamily::bspline) {
    const auto interior = interior_knots();
    if (static_cast<int>(interior.size()) + spline_degree() != order) {
      std::ostringstream os;
      os << "bspline with K=" << order << " and degree " << spline_degree() << " needs "
         << order - spline_degree() << " interior knots, got " << interior.size();
      throw ConfigError(os.str());
    }
    for (std::size_t i = 0; i < interior.size(); ++i) {
      if (!(interior[i] > domain.lo && interior[i] < domain.hi)) {
        throw ConfigError("bspline knots must lie strictly inside the domain");
      }
      if (i > 0 && !(interior[i] > interior[i - 1])) {
        throw ConfigError("bspline knots must be strictly increasing");
      }
    }
  }
}

namespace {

void check_points(const BasisSpec& spec, std::span<const double> x) {
  if (x.empty()) throw EmptyInputError("cannot build a basis on an empty sample");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!spec.domain.contains(x[i])) {
      std::ostringstream os;
      os << "point " << x[i] << " (row " << i << ") outside basis domain [" << spec.domain.lo
         << ", " << spec.domain.hi << "]";
      throw DomainError(os.str());
    }
  }
}

// Clamped knot vector: degree + 1 copies of each boundary.
std::vector<double> full_knot_vector(const BasisSpec& spec) {
  const int degree = spec.spline_degree();
  std::vector<double> t(degree + 1, spec.domain.lo);
  const auto interior = spec.interior_knots();
  t.insert(t.end(), interior.begin(), interior.end());
  t.insert(t.end(), degree + 1, spec.domain.hi);
  return t;
}

}  // namespace

Eigen::MatrixXd bspline_full_basis(const BasisSpec& spec, std::span<const double> x) {
  spec.validate();
  check_points(spec, x);
  const int degree = spec.spline_degree();
  const auto t = full_knot_vector(spec);
  const int nbasis = static_cast<int>(t.size()) - degree - 1;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), nbasis);

  std::vector<double> left(degree + 1), right(degree + 1), values(degree + 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    // Knot span with t[span] <= v < t[span + 1]; the right boundary belongs
    // to the last span.
    int span = nbasis - 1;
    if (v < t[nbasis]) {
      span = static_cast<int>(std::upper_bound(t.begin() + degree, t.begin() + nbasis + 1, v) -
                              t.begin()) -
             1;
    }
    values[0] = 1.0;
    for (int r = 1; r <= degree; ++r) {
      left[r] = v - t[span + 1 - r];
      right[r] = t[span + r] - v;
      double saved = 0.0;
      for (int s = 0; s < r; ++s) {
        const double denom = right[s + 1] + left[r - s];
        const double tmp = denom == 0.0 ? 0.0 : values[s] / denom;
        values[s] = saved + right[s + 1] * tmp;
        saved = left[r - s] * tmp;
      }
      values[r] = saved;
    }
    for (int r = 0; r <= degree; ++r) out(static_cast<Eigen::Index>(i), span - degree + r) = values[r];
  }
  return out;
}

Eigen::MatrixXd build_raw_basis(const BasisSpec& spec, std::span<const double> x) {
  spec.validate();
  check_points(spec, x);
  const auto n = static_cast<Eigen::Index>(x.size());
  if (spec.family == BasisFamily::bspline) {
    Eigen::MatrixXd full = bspline_full_basis(spec, x);
    return full.rightCols(full.cols() - 1);
  }
  Eigen::MatrixXd out(n, spec.order);
  for (Eigen::Index i = 0; i < n; ++i) {
    double power = 1.0;
    for (int k = 0; k < spec.order; ++k) {
      power *= x[static_cast<std::size_t>(i)];
      out(i, k) = power;
    }
  }
  return out;
}

Eigen::MatrixXd build_raw_basis(const BasisSpec& spec, const Eigen::VectorXd& x) {
  return build_raw_basis(spec, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

ConstraintSet ConstraintSet::for_pair(const Eigen::MatrixXd& x, int target, int argument) {
  const auto p = static_cast<int>(x.cols());
  if (target < 0 || target >= p || argument < 0 || argument >= p) {
    throw ShapeError("constraint pair index out of range");
  }
  ConstraintSet out;
  out.target = target;
  out.argument = argument;
  for (int m = 0; m < p; ++m) {
    if (m != target) out.regressors.push_back(m);
  }
  out.columns.resize(x.rows(), 1 + static_cast<Eigen::Index>(out.regressors.size()));
  out.columns.col(0).setOnes();
  for (std::size_t c = 0; c < out.regressors.size(); ++c) {
    out.columns.col(static_cast<Eigen::Index>(c) + 1) = x.col(out.regressors[c]);
  }
  return out;
}

ConstraintSet ConstraintSet::centering(Eigen::Index n, int argument) {
  ConstraintSet out;
  out.target = -1;
  out.argument = argument;
  out.columns = Eigen::MatrixXd::Ones(n, 1);
  return out;
}

Eigen::MatrixXd ConstraintSet::evaluate(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out(points.rows(), 1 + static_cast<Eigen::Index>(regressors.size()));
  out.col(0).setOnes();
  for (std::size_t c = 0; c < regressors.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c) + 1) = points.col(regressors[c]);
  }
  return out;
}

Eigen::MatrixXd ConstrainedBasis::projection_map() const {
  Eigen::MatrixXd out(raw_map_.rows() + constraint_coef_.rows(), raw_map_.cols());
  out << raw_map_, -constraint_coef_;
  return out;
}

Eigen::MatrixXd ConstrainedBasis::evaluate(const Eigen::MatrixXd& points) const {
  if (!spec_) throw ConfigError("constrained basis has no BasisSpec; cannot evaluate off-sample");
  const int needed = std::max({argument_, regressors_.empty() ? 0 : regressors_.back()});
  if (points.cols() <= needed) throw ShapeError("evaluation points have too few regressor columns");
  const Eigen::VectorXd xj = points.col(argument_);
  Eigen::MatrixXd out = build_raw_basis(*spec_, xj) * raw_map_;
  Eigen::MatrixXd cons(points.rows(), 1 + static_cast<Eigen::Index>(regressors_.size()));
  cons.col(0).setOnes();
  for (std::size_t c = 0; c < regressors_.size(); ++c) {
    cons.col(static_cast<Eigen::Index>(c) + 1) = points.col(regressors_[c]);
  }
  out.noalias() -= cons * constraint_coef_;
  return out;
}

ConstrainedBasis constrain_basis(const Eigen::MatrixXd& raw, const ConstraintSet& constraints,
                                 double rank_tol) {
  const Eigen::MatrixXd& cons = constraints.columns;
  if (raw.rows() != cons.rows()) {
    throw ShapeError("raw basis and constraint columns have different row counts");
  }
  if (raw.rows() == 0) throw EmptyInputError("cannot constrain an empty basis");
  if (raw.rows() <= raw.cols() + cons.cols()) {
    throw ShapeError("need more rows than raw columns plus constraints");
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(cons);
  const Eigen::MatrixXd gamma = qr.solve(raw);
  const Eigen::MatrixXd resid = raw - cons * gamma;

  // Orthonormal basis of the constraint span, extended by each kept column.
  const Eigen::Index rank = qr.rank();
  Eigen::MatrixXd basis = Eigen::MatrixXd(qr.householderQ()).leftCols(rank);
  std::vector<int> kept;
  for (Eigen::Index k = 0; k < raw.cols(); ++k) {
    const double original = raw.col(k).norm();
    if (original == 0.0) continue;
    Eigen::VectorXd v = resid.col(k);
    for (int pass = 0; pass < 2; ++pass) v -= basis * (basis.transpose() * v);
    const double norm = v.norm();
    if (norm < rank_tol * original) continue;
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = v / norm;
    kept.push_back(static_cast<int>(k));
  }

  if (kept.empty() && !constraints.structural_annihilation_possible()) {
    throw DegenerateBasisError("every basis column was annihilated by the moment constraints");
  }

  ConstrainedBasis out;
  out.target_ = constraints.target;
  out.argument_ = constraints.argument;
  out.regressors_ = constraints.regressors;
  out.kept_ = kept;
  const auto keff = static_cast<Eigen::Index>(kept.size());
  out.raw_map_ = Eigen::MatrixXd::Zero(raw.cols(), keff);
  out.constraint_coef_.resize(cons.cols(), keff);
  out.columns_.resize(raw.rows(), keff);
  for (Eigen::Index c = 0; c < keff; ++c) {
    const int k = kept[static_cast<std::size_t>(c)];
    out.raw_map_(k, c) = 1.0;
    out.constraint_coef_.col(c) = gamma.col(k);
    out.columns_.col(c) = resid.col(k);
  }
  return out;
}

ConstrainedBasis make_constrained_basis(const BasisSpec& spec, const Eigen::MatrixXd& x, int target,
                                        int argument, bool rescale, double rank_tol) {
  if (argument < 0 || argument >= x.cols()) throw ShapeError("basis argument index out of range");
  const Eigen::VectorXd xj = x.col(argument);
  Eigen::MatrixXd raw = build_raw_basis(spec, xj);

  Eigen::VectorXd scale = Eigen::VectorXd::Ones(raw.cols());
  if (rescale) {
    const double n = static_cast<double>(raw.rows());
    for (Eigen::Index k = 0; k < raw.cols(); ++k) {
      const double mean = raw.col(k).mean();
      const double sd = std::sqrt((raw.col(k).array() - mean).square().sum() / n);
      if (sd > 0.0) scale(k) = sd;
    }
    raw = raw * scale.cwiseInverse().asDiagonal();
  }

  const ConstraintSet constraints = target < 0 ? ConstraintSet::centering(x.rows(), argument)
                                               : ConstraintSet::for_pair(x, target, argument);
  ConstrainedBasis out = constrain_basis(raw, constraints, rank_tol);
  out.raw_map_ = scale.cwiseInverse().asDiagonal() * out.raw_map_;
  out.spec_ = spec;
  return out;
}

namespace {

std::vector<const ConstrainedBasis*> ordered_pairs(std::span<const ConstrainedBasis> bases, int p) {
  std::map<std::pair<int, int>, const ConstrainedBasis*> by_pair;
  for (const auto& b : bases) {
    if (b.target() < 0 || b.target() >= p || b.argument() < 0 || b.argument() >= p) {
      throw ShapeError("basis pair index out of range for the regressor matrix");
    }
    if (!by_pair.emplace(std::pair{b.argument(), b.target()}, &b).second) {
      throw ShapeError("duplicate basis for a (target, argument) pair");
    }
  }
  if (static_cast<int>(by_pair.size()) != p * p) {
    throw ShapeError("sieve block needs one basis for every (target, argument) pair");
  }
  std::vector<const ConstrainedBasis*> out;
  for (const auto& [key, ptr] : by_pair) out.push_back(ptr);
  return out;
}

template <typename ColumnsFn>
SieveBlock stack_pairs(const Eigen::MatrixXd& x, std::span<const ConstrainedBasis> bases,
                       ColumnsFn&& columns_of) {
  const auto p = static_cast<int>(x.cols());
  const auto ordered = ordered_pairs(bases, p);
  Eigen::Index width = 0;
  for (const auto* b : ordered) width += b->effective_columns();
  SieveBlock out;
  out.s.resize(x.rows(), width);
  Eigen::Index at = 0;
  for (const auto* b : ordered) {
    const Eigen::MatrixXd cols = columns_of(*b);
    out.s.middleCols(at, cols.cols()) = cols.array().colwise() * x.col(b->target()).array();
    out.layout.push_back({b->target(), b->argument(), at, cols.cols()});
    at += cols.cols();
  }
  return out;
}

}  // namespace

SieveBlock assemble_sieve_block(const Eigen::MatrixXd& x, std::span<const ConstrainedBasis> bases) {
  for (const auto& b : bases) {
    if (b.sample_size() != x.rows()) {
      throw ShapeError("regressor rows do not match the basis construction sample");
    }
  }
  return stack_pairs(x, bases, [](const ConstrainedBasis& b) { return b.columns(); });
}

SieveBlock sieve_rows(const Eigen::MatrixXd& x, std::span<const ConstrainedBasis> bases) {
  return stack_pairs(x, bases, [&x](const ConstrainedBasis& b) { return b.evaluate(x); });
}

SieveBlock control_sieve_rows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                              std::span<const ConstrainedBasis> bases) {
  if (z.rows() != x.rows()) throw ShapeError("control and regressor rows differ");
  std::vector<Eigen::MatrixXd> evaluated;
  Eigen::Index width = 0;
  for (const auto& b : bases) {
    evaluated.push_back(b.evaluate(x));
    width += evaluated.back().cols();
  }
  SieveBlock out;
  out.s.resize(x.rows(), width * z.cols());
  Eigen::Index at = 0;
  for (Eigen::Index q = 0; q < z.cols(); ++q) {
    for (std::size_t j = 0; j < bases.size(); ++j) {
      const auto& cols = evaluated[j];
      out.s.middleCols(at, cols.cols()) = cols.array().colwise() * z.col(q).array();
      out.layout.push_back({static_cast<int>(q), bases[j].argument(), at, cols.cols()});
      at += cols.cols();
    }
  }
  return out;
}

}  // namespace rcsieve
