#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rcsieve/errors.hpp"
#include "rcsieve/selection.hpp"

#include <cmath>

using namespace rcsieve;

namespace {

SampleData cubic_sample(std::uint64_t seed, Eigen::Index n, double noise = 0.2) {
  Rng rng = derive_rng(seed, 0);
  SampleData d;
  d.x = oracle::uniform_matrix(n, 1, rng);
  const Eigen::ArrayXd x = d.x.col(0).array();
  d.y = (0.5 + x + x * (x.square() - 0.3 * x)).matrix() + noise * oracle::normal_vector(n, rng);
  return d;
}

double mean_width(const FunctionComponent& c) { return (*c.upper - *c.lower).mean(); }

}  // namespace

TEST_CASE("cross-validation is deterministic for a fixed seed") {
  const SampleData d = cubic_sample(1, 300);
  CvOptions opt;
  opt.seed = 42;
  const auto a = cross_validate(d, ModelSpec{}, opt);
  const auto b = cross_validate(d, ModelSpec{}, opt);
  CHECK(a.criterion == b.criterion);
  CHECK(a.fold_of == b.fold_of);
  CHECK(a.chosen == b.chosen);
  opt.seed = 43;
  CHECK(cross_validate(d, ModelSpec{}, opt).fold_of != a.fold_of);
}

TEST_CASE("folds are balanced") {
  const SampleData d = cubic_sample(2, 103);
  const auto r = cross_validate(d, ModelSpec{}, CvOptions{});
  std::vector<int> counts(10, 0);
  for (int f : r.fold_of) ++counts[static_cast<std::size_t>(f)];
  for (int c : counts) CHECK((c == 10 || c == 11));
}

TEST_CASE("a single candidate is chosen") {
  CvOptions opt;
  opt.k_grid = {3};
  CHECK(cross_validate(cubic_sample(3, 200), ModelSpec{}, opt).chosen == 3);
}

TEST_CASE("ties go to the smaller order") {
  // A zero response fits exactly at every order.
  SampleData d = cubic_sample(4, 200);
  d.y.setZero();
  CvOptions opt;
  opt.k_grid = {4, 2, 3};
  const auto r = cross_validate(d, ModelSpec{}, opt);
  REQUIRE(r.criterion[0] == r.criterion[1]);
  REQUIRE(r.criterion[1] == r.criterion[2]);
  CHECK(r.chosen == 2);
}

TEST_CASE("a linear truth mostly selects the smallest order") {
  int picked_one = 0;
  const int trials = 40;
  for (int s = 0; s < trials; ++s) {
    Rng rng = derive_rng(500 + static_cast<std::uint64_t>(s), 0);
    SampleData d;
    d.x = oracle::uniform_matrix(200, 1, rng);
    d.y = (1.0 + 2.0 * d.x.col(0).array()).matrix() + 0.5 * oracle::normal_vector(200, rng);
    CvOptions opt;
    opt.seed = static_cast<std::uint64_t>(s);
    if (cross_validate(d, ModelSpec{}, opt).chosen == 1) ++picked_one;
  }
  CHECK(picked_one > trials / 2);
}

TEST_CASE("the cubic truth is not fitted by order 1") {
  const auto r = cross_validate(cubic_sample(5, 500, 0.05), ModelSpec{}, CvOptions{});
  CHECK(r.chosen >= 2);
  CHECK(r.criterion[1] < r.criterion[0]);
}

TEST_CASE("selection errors") {
  const SampleData d = cubic_sample(6, 30);
  CvOptions opt;
  opt.k_grid = {};
  CHECK_THROWS_AS(cross_validate(d, ModelSpec{}, opt), SelectionError);
  opt.k_grid = {30};
  CHECK_THROWS_AS(cross_validate(d, ModelSpec{}, opt), SelectionError);
  opt.k_grid = {1};
  opt.folds = 1;
  CHECK_THROWS_AS(cross_validate(d, ModelSpec{}, opt), SelectionError);
}

TEST_CASE("leave-one-out equals the closed form for a linear smoother") {
  const SampleData d = cubic_sample(7, 60);
  CvOptions opt;
  opt.k_grid = {2};
  opt.folds = 0;
  ModelSpec spec;
  spec.domains = {Interval{-1.0, 1.0}};
  spec.rescale = false;
  const auto r = cross_validate(d, spec, opt);
  CHECK(r.folds == 60);
  // Refitting with all columns of the full-sample span: [1, x, x^2, x^3].
  Eigen::MatrixXd m(60, 4);
  const Eigen::ArrayXd x = d.x.col(0).array();
  m << Eigen::VectorXd::Ones(60), x.matrix(), x.square().matrix(), x.cube().matrix();
  const Eigen::MatrixXd h = oracle::projector(m);
  const Eigen::VectorXd e = d.y - h * d.y;
  const double loo = (e.array() / (1.0 - h.diagonal().array())).square().mean();
  CHECK(r.criterion[0] == doctest::Approx(loo).epsilon(1e-8));
}

TEST_CASE("wild weight laws have the stated moments") {
  Rng rng = derive_rng(8, 0);
  const Eigen::VectorXd r = draw_wild_weights(WildWeights::rademacher, 200000, rng);
  CHECK(std::abs(r.mean()) < 0.01);
  CHECK(r.cwiseAbs().minCoeff() == 1.0);
  const Eigen::ArrayXd m = draw_wild_weights(WildWeights::mammen, 200000, rng).array();
  CHECK(std::abs(m.mean()) < 0.01);
  CHECK(m.square().mean() == doctest::Approx(1.0).epsilon(0.02));
  CHECK(m.cube().mean() == doctest::Approx(1.0).epsilon(0.05));
  CHECK(parse_wild_weights("mammen") == WildWeights::mammen);
  CHECK_THROWS_AS(parse_wild_weights("normal"), ConfigError);
}

TEST_CASE("type 7 quantiles") {
  std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(sample_quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(sample_quantile(v, 0.0) == 1.0);
  CHECK(sample_quantile(v, 1.0) == 4.0);
  CHECK(sample_quantile(v, 0.5) == doctest::Approx(2.5));
  std::vector<double> empty;
  CHECK_THROWS_AS(sample_quantile(empty, 0.5), EmptyInputError);
}

TEST_CASE("bands collapse without noise") {
  const SampleData d = cubic_sample(9, 200, 0.0);
  ModelSpec spec;
  spec.order = 3;
  const auto design = build_design(d, spec);
  const auto fit = profile_fit(design);
  BootstrapOptions opt;
  opt.draws = 99;
  const auto bands = wild_bootstrap_bands(fit, design, curve_points(design, 0, linspace(-0.9, 0.9, 21)), opt);
  for (const auto& c : bands.estimate.components) {
    CHECK((*c.upper - *c.lower).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((c.values - *c.lower).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("bands are ordered, reproducible and thread invariant") {
  const SampleData d = cubic_sample(10, 300);
  ModelSpec spec;
  spec.order = 3;
  const auto design = build_design(d, spec);
  const auto fit = profile_fit(design);
  const Eigen::MatrixXd pts = curve_points(design, 0, linspace(-0.9, 0.9, 31));
  BootstrapOptions opt;
  opt.draws = 200;
  opt.seed = 5;
  const auto a = wild_bootstrap_bands(fit, design, pts, opt);
  opt.threads = 3;
  const auto b = wild_bootstrap_bands(fit, design, pts, opt);
  REQUIRE(a.estimate.aggregates.size() == 1);
  const auto& ca = a.estimate.aggregates[0];
  const auto& cb = b.estimate.aggregates[0];
  CHECK((ca.lower->array() <= ca.upper->array()).all());
  CHECK(*ca.lower == *cb.lower);
  CHECK(*ca.upper == *cb.upper);
  CHECK(a.dropped == 0);
}

TEST_CASE("Rademacher and Mammen bands have similar widths") {
  const SampleData d = cubic_sample(11, 400, 0.3);
  ModelSpec spec;
  spec.order = 3;
  const auto design = build_design(d, spec);
  const auto fit = profile_fit(design);
  const Eigen::MatrixXd pts = curve_points(design, 0, linspace(-0.8, 0.8, 17));
  BootstrapOptions opt;
  opt.draws = 500;
  const double wr = mean_width(wild_bootstrap_bands(fit, design, pts, opt).estimate.aggregates[0]);
  opt.weights = WildWeights::mammen;
  const double wm = mean_width(wild_bootstrap_bands(fit, design, pts, opt).estimate.aggregates[0]);
  CHECK(std::abs(wr - wm) / wr < 0.2);
}

TEST_CASE("bands shrink with the sample size") {
  double widths[2];
  int i = 0;
  for (Eigen::Index n : {100, 500}) {
    const SampleData d = cubic_sample(12, n, 0.3);
    ModelSpec spec;
    spec.order = 3;
    spec.domains = {Interval{-1.0, 1.0}};
    const auto design = build_design(d, spec);
    const auto fit = profile_fit(design);
    BootstrapOptions opt;
    opt.draws = 300;
    widths[i++] = mean_width(
        wild_bootstrap_bands(fit, design, curve_points(design, 0, linspace(-0.8, 0.8, 17)), opt)
            .estimate.aggregates[0]);
  }
  CHECK(widths[0] > widths[1]);
}

TEST_CASE("bootstrap option checks") {
  const SampleData d = cubic_sample(13, 100);
  const auto design = build_design(d, ModelSpec{});
  const auto fit = profile_fit(design);
  const Eigen::MatrixXd pts = curve_points(design, 0, linspace(-0.5, 0.5, 3));
  BootstrapOptions opt;
  opt.draws = 98;
  CHECK_THROWS_AS(wild_bootstrap_bands(fit, design, pts, opt), ConfigError);
  opt.draws = 99;
  opt.level = 1.0;
  CHECK_THROWS_AS(wild_bootstrap_bands(fit, design, pts, opt), ConfigError);
}
