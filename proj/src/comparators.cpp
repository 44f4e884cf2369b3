#include "rcsieve/comparators.hpp"

#include "rcsieve/design_matrix.hpp"
#include "rcsieve/errors.hpp"

#include <algorithm>
#include <cmath>

namespace rcsieve {

std::string to_string(ComparatorMethod m) {
  return m == ComparatorMethod::ols ? "ols" : "control_function";
}

namespace {

Eigen::Index index_of(const std::vector<std::string>& labels, const std::string& label) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw SchemaError("no coefficient labelled '" + label + "'");
  return it - labels.begin();
}

}  // namespace

double ComparatorFit::coefficient(const std::string& label) const {
  return coefficients(index_of(labels, label));
}

double ComparatorFit::standard_error(const std::string& label) const {
  return robust_se(index_of(labels, label));
}

ComparatorFit fit_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& columns,
                      const std::vector<std::string>& labels) {
  if (y.size() != columns.rows()) throw ShapeError("response and design rows differ");
  if (columns.rows() <= columns.cols()) throw ShapeError("OLS needs more rows than columns");
  ComparatorFit out;
  out.labels = labels.empty() ? default_labels("c", columns.cols()) : labels;
  require_full_column_rank(columns, out.labels);

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(columns);
  out.coefficients = qr.solve(y);
  out.residuals = y - columns * out.coefficients;
  const Eigen::MatrixXd bread = (columns.transpose() * columns).inverse();
  const Eigen::MatrixXd meat =
      columns.transpose() * out.residuals.array().square().matrix().asDiagonal() * columns;
  out.vcov = bread * meat * bread;
  out.robust_se = out.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

ComparatorFit fit_ols_simple(const Eigen::VectorXd& y, const Eigen::VectorXd& x) {
  Eigen::MatrixXd cols(x.size(), 2);
  cols << Eigen::VectorXd::Ones(x.size()), x;
  return fit_ols(y, cols, {"const", "x"});
}

ComparatorFit fit_control_function(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& instrument) {
  const Eigen::Index n = y.size();
  if (x.size() != n || instrument.size() != n) throw ShapeError("control function inputs differ in length");

  Eigen::MatrixXd stage1_cols(n, 2);
  stage1_cols << Eigen::VectorXd::Ones(n), instrument;
  const ComparatorFit stage1 = fit_ols(x, stage1_cols, {"const", "instrument"});
  const double slope = stage1.coefficients(1);
  const double sd_x = std::sqrt((x.array() - x.mean()).square().mean());
  const double sd_z = std::sqrt((instrument.array() - instrument.mean()).square().mean());
  if (std::abs(slope) * sd_z <= 1e-10 * std::max(sd_x, 1e-300)) {
    throw WeakInstrumentError("first-stage slope of x on the instrument is zero");
  }

  const Eigen::VectorXd v = stage1.residuals;
  // Rounding noise would pass the column test; an exact first stage leaves v = 0.
  if (v.norm() <= 1e-10 * std::max(sd_x * std::sqrt(static_cast<double>(n)), 1e-300)) {
    throw CollinearityError("first-stage residual is zero: x is exactly linear in the instrument");
  }
  Eigen::MatrixXd cols(n, 4);
  cols << Eigen::VectorXd::Ones(n), x, v, x.cwiseProduct(v);
  ComparatorFit out = fit_ols(y, cols, {"const", "x", "v_hat", "x*v_hat"});
  out.method = ComparatorMethod::control_function;
  out.first_stage = stage1.coefficients;
  const double tss = (x.array() - x.mean()).square().sum();
  out.first_stage_r2 = tss > 0.0 ? 1.0 - v.squaredNorm() / tss : 0.0;
  return out;
}

}  // namespace rcsieve
