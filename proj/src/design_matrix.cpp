#include "rcsieve/design_matrix.hpp"

#include "rcsieve/errors.hpp"

#include <cmath>

namespace rcsieve {

std::vector<std::string> default_labels(const std::string& stem, Eigen::Index count) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < count; ++i) out.push_back(stem + std::to_string(i + 1));
  return out;
}

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw DataError(std::string("non-finite entries in ") + what);
}

Eigen::MatrixXd hstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

LabeledMatrix build_w(const Eigen::MatrixXd& x, const std::vector<std::string>& x_labels) {
  if (x.rows() < 1 || x.cols() < 1) throw ShapeError("build_w needs n >= 1 and p >= 1");
  require_finite(x, "regressors");
  const Eigen::Index p = x.cols();
  const auto names = x_labels.empty() ? default_labels("x", p) : x_labels;
  if (static_cast<Eigen::Index>(names.size()) != p) throw ShapeError("wrong number of x labels");

  LabeledMatrix out;
  out.values.resize(x.rows(), 1 + p + p * (p - 1) / 2);
  out.values.col(0).setOnes();
  out.labels.push_back("const");
  out.values.middleCols(1, p) = x;
  out.labels.insert(out.labels.end(), names.begin(), names.end());
  Eigen::Index at = 1 + p;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index l = j + 1; l < p; ++l) {
      out.values.col(at++) = x.col(j).cwiseProduct(x.col(l));
      out.labels.push_back(names[j] + "*" + names[l]);
    }
  }
  return out;
}

void require_full_column_rank(const Eigen::MatrixXd& m, const std::vector<std::string>& labels,
                              double tol) {
  Eigen::MatrixXd basis(m.rows(), 0);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double original = m.col(c).norm();
    Eigen::VectorXd v = m.col(c);
    for (int pass = 0; pass < 2; ++pass) v -= basis * (basis.transpose() * v);
    const double norm = v.norm();
    if (original == 0.0 || norm < tol * original) {
      const std::string name =
          c < static_cast<Eigen::Index>(labels.size()) ? labels[c] : "column " + std::to_string(c);
      throw CollinearityError("design column '" + name + "' is collinear with preceding columns");
    }
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = v / norm;
  }
}

std::vector<Interval> empirical_domains(const Eigen::MatrixXd& x) {
  std::vector<Interval> out;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Interval d{x.col(j).minCoeff(), x.col(j).maxCoeff()};
    if (!(d.lo < d.hi)) d = {d.lo - 0.5, d.hi + 0.5};
    out.push_back(d);
  }
  return out;
}

DesignMatrices build_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                            const ModelSpec& spec, const std::vector<std::string>& x_labels) {
  return build_control_design(y, x, Eigen::MatrixXd(x.rows(), 0), spec, x_labels, {});
}

DesignMatrices build_control_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                    const Eigen::MatrixXd& z, const ModelSpec& spec,
                                    const std::vector<std::string>& x_labels,
                                    const std::vector<std::string>& z_labels) {
  if (y.size() != x.rows()) throw ShapeError("response and regressors have different row counts");
  if (z.rows() != x.rows()) throw ShapeError("controls and regressors have different row counts");
  require_finite(y, "response");
  require_finite(z, "controls");

  DesignMatrices d;
  d.y = y;
  d.x = x;
  auto w = build_w(x, x_labels);
  d.x_labels = x_labels.empty() ? default_labels("x", x.cols()) : x_labels;
  d.w = std::move(w.values);
  d.w_labels = std::move(w.labels);
  d.spec = spec;
  d.domains = spec.domains.empty() ? empirical_domains(x) : spec.domains;
  if (static_cast<Eigen::Index>(d.domains.size()) != x.cols()) {
    throw ShapeError("need one basis domain per regressor");
  }
  d.spec.domains = d.domains;

  if (z.cols() > 0) {
    d.z = z;
    d.z_labels = z_labels.empty() ? default_labels("z", z.cols()) : z_labels;
    if (static_cast<Eigen::Index>(d.z_labels.size()) != z.cols()) {
      throw ShapeError("wrong number of z labels");
    }
  }
  require_full_column_rank(d.parametric(), d.parametric_labels());

  const auto p = static_cast<int>(x.cols());
  for (int arg = 0; arg < p; ++arg) {
    BasisSpec bs{spec.family, spec.order, spec.knots, d.domains[arg]};
    for (int tgt = 0; tgt < p; ++tgt) {
      d.bases.push_back(make_constrained_basis(bs, x, tgt, arg, spec.rescale, spec.rank_tol));
    }
  }
  d.s = assemble_sieve_block(x, d.bases);

  if (d.z) {
    for (int arg = 0; arg < p; ++arg) {
      BasisSpec bs{spec.control_family.value_or(spec.family), spec.control_order.value_or(spec.order),
                   spec.knots, d.domains[arg]};
      d.control_bases.push_back(make_constrained_basis(bs, x, -1, arg, spec.rescale, spec.rank_tol));
    }
    d.z_sieve = control_sieve_rows(x, *d.z, d.control_bases);
  }
  return d;
}

SampleData SampleData::subset(const std::vector<Eigen::Index>& rows) const {
  SampleData out;
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.x.resize(out.y.size(), x.cols());
  if (z) out.z = Eigen::MatrixXd(out.y.size(), z->cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    const auto k = static_cast<Eigen::Index>(i);
    out.y(k) = y(r);
    out.x.row(k) = x.row(r);
    if (z) out.z->row(k) = z->row(r);
  }
  out.x_labels = x_labels;
  out.z_labels = z_labels;
  return out;
}

DesignMatrices build_design(const SampleData& data, const ModelSpec& spec) {
  if (data.z && data.z->cols() > 0) {
    return build_control_design(data.y, data.x, *data.z, spec, data.x_labels, data.z_labels);
  }
  return build_design(data.y, data.x, spec, data.x_labels);
}

Eigen::MatrixXd DesignMatrices::parametric() const { return z ? hstack(w, *z) : w; }

std::vector<std::string> DesignMatrices::parametric_labels() const {
  auto out = w_labels;
  out.insert(out.end(), z_labels.begin(), z_labels.end());
  return out;
}

Eigen::MatrixXd DesignMatrices::nonparametric() const {
  return z_sieve ? hstack(s.s, z_sieve->s) : s.s;
}

Eigen::Index DesignMatrices::nonparametric_width() const {
  return s.cols() + (z_sieve ? z_sieve->cols() : 0);
}

Eigen::MatrixXd DesignMatrices::parametric_rows(const Eigen::MatrixXd& x_new,
                                                const std::optional<Eigen::MatrixXd>& z_new) const {
  if (x_new.cols() != p()) throw ShapeError("new regressors have the wrong number of columns");
  Eigen::MatrixXd wn = build_w(x_new, x_labels).values;
  if (!z) return wn;
  if (!z_new || z_new->cols() != q() || z_new->rows() != x_new.rows()) {
    throw ShapeError("new controls missing or mis-shaped");
  }
  return hstack(wn, *z_new);
}

Eigen::MatrixXd DesignMatrices::nonparametric_rows(
    const Eigen::MatrixXd& x_new, const std::optional<Eigen::MatrixXd>& z_new) const {
  if (x_new.cols() != p()) throw ShapeError("new regressors have the wrong number of columns");
  Eigen::MatrixXd sn = sieve_rows(x_new, bases).s;
  if (!z) return sn;
  if (!z_new || z_new->cols() != q() || z_new->rows() != x_new.rows()) {
    throw ShapeError("new controls missing or mis-shaped");
  }
  return hstack(sn, control_sieve_rows(x_new, *z_new, control_bases).s);
}

}  // namespace rcsieve
