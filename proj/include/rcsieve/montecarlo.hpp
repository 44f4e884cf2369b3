#pragma once

#include "rcsieve/comparators.hpp"
#include "rcsieve/design_matrix.hpp"
#include "rcsieve/estimator.hpp"
#include "rcsieve/random.hpp"
#include "rcsieve/selection.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rcsieve {

// ---------------------------------------------------------------------------
// Truncated normal sampling

/// i.i.d. Normal(mean, sd^2) draws conditioned to `bounds`, by inversion on
/// the truncated quantile range. Throws DegenerateTruncationError when the
/// interval carries less than 1e-12 of the normal mass.
Eigen::VectorXd sample_truncnorm(Eigen::Index n, double mean, double sd, Interval bounds, Rng& rng);
Eigen::VectorXd sample_truncnorm(Eigen::Index n, double mean, double sd, Interval bounds,
                                 std::uint64_t seed);

/// E[X^2] of a standard normal truncated to `bounds` (closed form).
double truncnorm_second_moment(Interval bounds);
/// Var of a standard normal truncated to `bounds` (closed form).
double truncnorm_variance(Interval bounds);

struct BivariateSample {
  Eigen::MatrixXd values;  // n x 2
  double acceptance_rate = 0.0;
};

/// Standard bivariate normal with correlation rho restricted to the square
/// bounds x bounds, by accept-reject. Throws DegenerateTruncationError when
/// the acceptance rate drops below 1e-3.
BivariateSample sample_truncnorm_bivariate(Eigen::Index n, double rho, Interval bounds, Rng& rng);
BivariateSample sample_truncnorm_bivariate(Eigen::Index n, double rho, Interval bounds,
                                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Simulation designs

enum class DesignId { d1_uni, d1_biv, d2_uni, d2_biv, d3_iv };

std::string to_string(DesignId id);
DesignId parse_design_id(const std::string& name);

struct SimDesign {
  DesignId id = DesignId::d1_uni;
  Eigen::Index n = 500;
  int reps = 1000;
  std::uint64_t seed = 1;
  Interval bounds{-1.0, 1.0};
  /// Latent correlation of the truncated bivariate regressors.
  double rho_x = 0.0;
  /// MASE grid: `grid_points` equispaced points on [grid_lo, grid_hi] per
  /// regressor (a product grid when p = 2).
  Eigen::Index grid_points = 101;
  double grid_lo = -0.99;
  double grid_hi = 0.99;
  /// Draw fresh regressors for every replication (false keeps the first
  /// replication's regressors; for d3_iv the instrument is kept).
  bool redraw_x = true;
  /// Cov(beta, zeta) in the instrument design; 0 switches endogeneity off.
  double beta_zeta_cov = 0.4;

  int p() const;
  void validate() const;
};

struct TruthSpec {
  std::vector<std::string> labels;  // parametric labels, same order as W
  Eigen::VectorXd delta;
  /// Evaluation points for the functional truths (m x p).
  Eigen::MatrixXd grid;
  /// True aggregate b_{j'} on the grid, one per regressor.
  std::vector<Eigen::VectorXd> b_true;
  std::string notes;
};

struct SimDataset {
  SampleData data;
  /// Design 3 only.
  std::optional<Eigen::VectorXd> instrument;
};

/// True parametric targets and functional coefficients of a design. d1_biv
/// values come from 2-D Gauss-Legendre quadrature over the truncated
/// density at the configured rho_x; d3_iv's b(x) = E[beta - 1 | X = x] is
/// computed by 1-D quadrature over the instrument.
TruthSpec design_truth(const SimDesign& design);

/// Dataset of replication `rep`, a pure function of (design, rep).
SimDataset generate(const SimDesign& design, int rep);

/// Basis support used when fitting a design: the truncation box for d1/d2,
/// and the sample range widened to cover the MASE grid for d3.
std::vector<Interval> design_domains(const SimDesign& design, const SampleData& data);

/// Synthetic data shaped like a malaria-ecology panel: outcome change in
/// roughly [-0.3, 0.8], a malaria index in [0, 1.13] with mass at zero and
/// `regions` - 1 regional dummies.
SampleData generate_empirical_like(Eigen::Index n, int regions, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Replication studies

struct EstimatorSpec {
  ModelSpec model;
  CvOptions cv;
  /// Skip cross-validation and use this order.
  std::optional<int> fixed_order;
  FitOptions fit;
};

struct StudyOptions {
  EstimatorSpec estimator;
  std::vector<ComparatorMethod> comparators;
  unsigned threads = 1;
  double max_failure_rate = 0.02;
};

struct ParameterSummary {
  std::string estimator;  // "snp", "ols" or "cf"
  std::string label;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double se = 0.0;  // standard deviation over replications (divisor R)
  double rmse = 0.0;
};

struct ReplicationResult {
  int rep = 0;
  bool ok = false;
  std::string error;
  int order = 0;
  /// "estimator:label" -> estimate, in a fixed order shared by all reps.
  std::vector<std::string> keys;
  std::vector<double> estimates;
  /// Studentized SNP delta, same order as TruthSpec::labels.
  Eigen::VectorXd studentized;
  Eigen::VectorXd snp_se;
  /// Grid-average squared error per aggregate b_{j'}.
  std::vector<double> ase;
};

struct RepSummary {
  SimDesign design;
  TruthSpec truth;
  std::vector<ParameterSummary> parameters;
  std::vector<std::string> mase_labels;
  std::vector<double> mase;
  std::vector<std::string> studentized_labels;
  Eigen::MatrixXd studentized;  // successful reps x parameters
  std::vector<int> chosen_orders;
  int failures = 0;
  std::vector<ReplicationResult> replications;

  const ParameterSummary& parameter(const std::string& estimator, const std::string& label) const;
  double mase_of(const std::string& label) const;
  /// Estimates of one key ("snp:x1") across successful replications.
  std::vector<double> series(const std::string& key) const;
};

/// One replication: data, CV-selected K, profile fit, comparators.
ReplicationResult run_replication(const SimDesign& design, const TruthSpec& truth,
                                  const StudyOptions& options, int rep);

/// Runs design.reps replications (in parallel when options.threads > 1)
/// and aggregates them in replication order. Throws StudyFailureError when
/// more than max_failure_rate of the replications fail.
RepSummary run_study(const SimDesign& design, const StudyOptions& options);

/// Aggregate a set of replications (exposed for testing).
RepSummary summarize(const SimDesign& design, const TruthSpec& truth,
                     std::vector<ReplicationResult> reps, double max_failure_rate);

}  // namespace rcsieve
