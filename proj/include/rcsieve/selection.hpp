#pragma once

#include "rcsieve/design_matrix.hpp"
#include "rcsieve/estimator.hpp"
#include "rcsieve/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace rcsieve {

struct CvOptions {
  std::vector<int> k_grid{1, 2, 3, 4, 5, 6};
  /// Number of folds; 0 or n means leave-one-out.
  int folds = 10;
  std::uint64_t seed = 0;
  FitOptions fit;
};

struct CvReport {
  std::vector<int> k_grid;
  /// Mean squared out-of-fold prediction error per candidate; +inf when a
  /// candidate could not be fitted on some fold.
  std::vector<double> criterion;
  int chosen = 0;
  int folds = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold_of;  // fold index of every row
};

/// K-fold cross-validation of the basis order. Bases are rebuilt on each
/// training fold; `spec.domains` should already cover the full sample so
/// held-out points stay inside the basis support (empty domains are
/// resolved from the full sample here). Ties go to the smaller K.
CvReport cross_validate(const SampleData& data, const ModelSpec& spec, const CvOptions& options);

enum class WildWeights { rademacher, mammen };

std::string to_string(WildWeights w);
WildWeights parse_wild_weights(const std::string& name);

/// n i.i.d. zero-mean, unit-variance wild bootstrap multipliers.
Eigen::VectorXd draw_wild_weights(WildWeights law, Eigen::Index n, Rng& rng);

struct BootstrapOptions {
  int draws = 500;
  double level = 0.95;
  WildWeights weights = WildWeights::rademacher;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  FitOptions fit;
};

struct BootstrapBands {
  int draws = 0;
  int dropped = 0;
  double level = 0.95;
  WildWeights weights = WildWeights::rademacher;
  std::uint64_t seed = 0;
  /// Point estimates with pointwise lower/upper bands filled in.
  FunctionEstimate estimate;
};

/// Pointwise wild-bootstrap bands for every fitted function at `points`.
/// Each draw refits Y* = Yhat + w * Uhat with the same K and the same
/// constrained bases (the regressors are unchanged by the resampling).
BootstrapBands wild_bootstrap_bands(const FitResult& fit, const DesignMatrices& design,
                                    const Eigen::MatrixXd& points, const BootstrapOptions& options);

/// Linear-interpolation sample quantile (type 7). `values` is sorted in place.
double sample_quantile(std::vector<double>& values, double prob);

}  // namespace rcsieve
