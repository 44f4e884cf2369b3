#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rcsieve/errors.hpp"
#include "rcsieve/montecarlo.hpp"

#include <cmath>
#include <numeric>

using namespace rcsieve;

namespace {

double tn_mass(double lo, double hi) { return oracle::simpson(oracle::normal_pdf, lo, hi); }

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

StudyOptions quick_options(int order) {
  StudyOptions opt;
  opt.estimator.fixed_order = order;
  opt.comparators = {ComparatorMethod::ols};
  return opt;
}

}  // namespace

TEST_CASE("truncated normal moments: closed form against quadrature") {
  const Interval box{-1.0, 1.0};
  const double mass = tn_mass(-1.0, 1.0);
  const double m2 = oracle::simpson([](double x) { return x * x * oracle::normal_pdf(x); }, -1.0, 1.0) / mass;
  CHECK(truncnorm_second_moment(box) == doctest::Approx(m2).epsilon(1e-10));
  CHECK(truncnorm_variance(box) == doctest::Approx(m2).epsilon(1e-10));
  CHECK(truncnorm_variance(box) == doctest::Approx(0.29109).epsilon(1e-4));

  const Interval skew{-0.5, 2.0};
  const double ms = tn_mass(-0.5, 2.0);
  const double mean = oracle::simpson([](double x) { return x * oracle::normal_pdf(x); }, -0.5, 2.0) / ms;
  const double sec = oracle::simpson([](double x) { return x * x * oracle::normal_pdf(x); }, -0.5, 2.0) / ms;
  CHECK(truncnorm_variance(skew) == doctest::Approx(sec - mean * mean).epsilon(1e-10));
}

TEST_CASE("truncated normal sampler") {
  const Eigen::VectorXd x = sample_truncnorm(100000, 0.0, 1.0, Interval{-1.0, 1.0}, 11u);
  CHECK(x.minCoeff() >= -1.0);
  CHECK(x.maxCoeff() <= 1.0);
  CHECK(std::abs(x.mean()) < 0.01);
  const double var = (x.array() - x.mean()).square().mean();
  CHECK(std::abs(var - 0.29109) < 0.01);

  const Eigen::VectorXd y = sample_truncnorm(50000, 0.2, 0.35, Interval{0.0, 1.13}, 12u);
  CHECK(y.minCoeff() >= 0.0);
  CHECK(y.maxCoeff() <= 1.13);

  CHECK(sample_truncnorm(10, 0.0, 1.0, Interval{-1.0, 1.0}, 5u) ==
        sample_truncnorm(10, 0.0, 1.0, Interval{-1.0, 1.0}, 5u));
  CHECK_THROWS_AS(sample_truncnorm(10, 0.0, 1.0, Interval{40.0, 41.0}, 1u), DegenerateTruncationError);
  CHECK_THROWS_AS(sample_truncnorm(10, 0.0, 1.0, Interval{1.0, -1.0}, 1u), DomainError);
}

TEST_CASE("bivariate truncated sampler") {
  double previous = -1.0;
  for (double rho : {0.0, 0.3, 0.6}) {
    const auto s = sample_truncnorm_bivariate(40000, rho, Interval{-1.0, 1.0}, 21u);
    CHECK(s.values.cwiseAbs().maxCoeff() <= 1.0);
    const Eigen::MatrixXd c = s.values.rowwise() - s.values.colwise().mean();
    const Eigen::Matrix2d cov = c.transpose() * c / 40000.0;
    const double corr = cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
    CHECK(corr > previous);
    previous = corr;
    const double r = rho;
    const double q = 1.0 / (2.0 * M_PI * std::sqrt(1.0 - r * r));
    const double box = oracle::simpson2(
        [&](double a, double b) { return q * std::exp(-(a * a - 2 * r * a * b + b * b) / (2 * (1 - r * r))); },
        -1.0, 1.0, 200);
    CHECK(s.acceptance_rate == doctest::Approx(box).epsilon(0.03));
    if (rho == 0.0) {
      CHECK(std::abs(corr) < 0.02);
      CHECK(std::abs(cov(0, 0) - 0.29109) < 0.01);
      CHECK(std::abs(cov(1, 1) - 0.29109) < 0.01);
    }
  }
  CHECK_THROWS_AS(sample_truncnorm_bivariate(10, 1.0, Interval{-1.0, 1.0}, 1u), DomainError);
}

TEST_CASE("design names round trip") {
  for (auto id : {DesignId::d1_uni, DesignId::d1_biv, DesignId::d2_uni, DesignId::d2_biv, DesignId::d3_iv}) {
    CHECK(parse_design_id(to_string(id)) == id);
  }
  CHECK_THROWS_AS(parse_design_id("d4"), ConfigError);
}

TEST_CASE("univariate truth") {
  const auto t = design_truth(SimDesign{DesignId::d1_uni});
  CHECK(t.delta(1) == doctest::Approx(0.5822501895).epsilon(1e-9));
  // b has mean zero under the regressor law.
  const double mass = tn_mass(-1.0, 1.0);
  const double m2 = t.delta(1) / 2.0;
  const double eb =
      oracle::simpson([&](double x) { return (2 * x * x - 2 * m2) * oracle::normal_pdf(x); }, -1.0, 1.0) / mass;
  CHECK(std::abs(eb) < 1e-10);
  CHECK(t.grid.rows() == 101);
  CHECK(t.grid(0, 0) == -0.99);
  CHECK(t.b_true[0](50) == doctest::Approx(-2.0 * m2));
}

TEST_CASE("bivariate truths against 2-D Simpson") {
  for (double rho : {0.0, 0.5}) {
    SimDesign d{DesignId::d1_biv};
    d.rho_x = rho;
    d.grid_points = 11;
    const auto t = design_truth(d);
    const double c = 1.0 / (2.0 * (1.0 - rho * rho));
    auto e = [&](const std::function<double(double, double)>& f) {
      auto dens = [&](double a, double b) { return std::exp(-c * (a * a - 2 * rho * a * b + b * b)); };
      const double mass = oracle::simpson2(dens, -1.0, 1.0, 200);
      return oracle::simpson2([&](double a, double b) { return f(a, b) * dens(a, b); }, -1.0, 1.0, 200) / mass;
    };
    auto q = [](double a, double b) { return 1.5 * (a * a + b * b); };
    auto g = [](double a, double b) { return std::exp(a) + std::exp(b); };
    const double e1 = e([](double a, double) { return a; });
    const double v1 = e([](double a, double) { return a * a; }) - e1 * e1;
    const double a12 = (e([&](double a, double b) { return b * q(a, b); }) - e1 * e(q)) / v1;
    const double a21 = (e([&](double a, double b) { return a * g(a, b); }) - e1 * e(g)) / v1;
    CHECK(t.delta(1) == doctest::Approx(e(q) - a12 * e1).epsilon(1e-8));
    CHECK(t.delta(2) == doctest::Approx(e(g) - a21 * e1).epsilon(1e-8));
    CHECK(t.delta(3) == doctest::Approx(a12 + a21).epsilon(1e-8));
    // The truths satisfy the moment conditions E[b_j'] = 0 and E[X_m b_j'] = 0.
    const auto& b = t.b_true;
    REQUIRE(b.size() == 2);
    const double d1 = t.delta(1);
    auto b1 = [&](double a, double bb) { return q(a, bb) - d1 - a12 * bb; };
    CHECK(std::abs(e(b1)) < 1e-8);
    CHECK(std::abs(e([&](double a, double bb) { return bb * b1(a, bb); })) < 1e-8);
    CHECK(b[0](0) == doctest::Approx(b1(-0.99, -0.99)).epsilon(1e-8));
    if (rho == 0.0) {
      CHECK(std::abs(a12) < 1e-10);
      CHECK(a21 == doctest::Approx(1.097487).epsilon(1e-5));
    }
  }
}

TEST_CASE("instrument design truth against 1-D Simpson") {
  SimDesign d{DesignId::d3_iv};
  d.grid_points = 7;
  const auto t = design_truth(d);
  for (Eigen::Index i = 0; i < 7; ++i) {
    const double x = t.grid(i, 0);
    auto w = [&](double z) { return oracle::normal_pdf(z) * oracle::normal_pdf(x - 1.0 - 1.5 * z); };
    const double num = oracle::simpson([&](double z) { return (x - 1.0 - 1.5 * z) * w(z); }, -1.0, 1.0);
    const double den = oracle::simpson(w, -1.0, 1.0);
    CHECK(t.b_true[0](i) == doctest::Approx(0.4 * num / den).epsilon(1e-8));
  }
  CHECK(t.delta(1) == 1.0);
  d.beta_zeta_cov = 0.0;
  CHECK(design_truth(d).b_true[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generation is a pure function of the design and replication") {
  SimDesign d{DesignId::d1_biv};
  d.n = 200;
  const auto a = generate(d, 3);
  const auto b = generate(d, 3);
  CHECK(a.data.x == b.data.x);
  CHECK(a.data.y == b.data.y);
  CHECK(generate(d, 4).data.x != a.data.x);

  d.redraw_x = false;
  const auto f0 = generate(d, 0);
  const auto f5 = generate(d, 5);
  CHECK(f0.data.x == f5.data.x);
  CHECK(f0.data.y != f5.data.y);

  SimDesign iv{DesignId::d3_iv};
  iv.n = 100;
  iv.redraw_x = false;
  CHECK(*generate(iv, 0).instrument == *generate(iv, 2).instrument);
}

TEST_CASE("design domains") {
  SimDesign d{DesignId::d1_uni};
  d.n = 50;
  const auto doms = design_domains(d, generate(d, 0).data);
  CHECK(doms[0].lo == -1.0);
  CHECK(doms[0].hi == 1.0);
  SimDesign iv{DesignId::d3_iv};
  iv.n = 50;
  const auto ds = generate(iv, 0);
  const auto di = design_domains(iv, ds.data);
  CHECK(di[0].lo <= std::min(ds.data.x.minCoeff(), -0.99));
  CHECK(di[0].hi >= std::max(ds.data.x.maxCoeff(), 0.99));
}

TEST_CASE("design validation") {
  SimDesign d;
  d.rho_x = 1.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = SimDesign{};
  d.reps = 0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  StudyOptions opt;
  opt.comparators = {ComparatorMethod::control_function};
  CHECK_THROWS_AS(run_study(SimDesign{}, opt), ConfigError);
}

TEST_CASE("study summaries") {
  SimDesign d{DesignId::d1_uni};
  d.n = 200;
  d.reps = 30;
  d.seed = 3;
  StudyOptions opt;
  opt.estimator.cv.k_grid = {1, 2, 3};
  opt.comparators = {ComparatorMethod::ols};
  const auto s = run_study(d, opt);
  CHECK(s.failures == 0);
  CHECK(s.replications.size() == 30);
  CHECK(s.mase_of("b[1]") >= 0.0);
  for (const auto& p : s.parameters) {
    CHECK(p.rmse * p.rmse == doctest::Approx(p.bias * p.bias + p.se * p.se).epsilon(1e-12));
    const auto v = s.series(p.estimator + ":" + p.label);
    double msq = 0.0;
    for (double e : v) msq += (e - p.truth) * (e - p.truth);
    CHECK(std::sqrt(msq / static_cast<double>(v.size())) == doctest::Approx(p.rmse).epsilon(1e-9));
  }
  CHECK(s.parameter("snp", "x1").truth == doctest::Approx(0.5822501895));
  CHECK(s.parameter("ols", "x1").truth == doctest::Approx(0.5822501895));
  CHECK(s.studentized.rows() == 30);
  CHECK(s.chosen_orders.size() == 30);

  opt.threads = 3;
  const auto t = run_study(d, opt);
  CHECK(t.series("snp:x1") == s.series("snp:x1"));
  CHECK(t.chosen_orders == s.chosen_orders);
  CHECK(t.mase == s.mase);
}

TEST_CASE("too many failed replications") {
  SimDesign d{DesignId::d1_uni};
  const auto truth = design_truth(d);
  std::vector<ReplicationResult> reps(10);
  for (int r = 0; r < 10; ++r) {
    reps[static_cast<std::size_t>(r)].rep = r;
    reps[static_cast<std::size_t>(r)].ok = false;
    reps[static_cast<std::size_t>(r)].error = "IdentificationError: test";
  }
  CHECK_THROWS_AS(summarize(d, truth, reps, 0.02), StudyFailureError);
}

TEST_CASE("random coefficients independent of X: SNP tracks OLS") {
  SimDesign d{DesignId::d2_uni};
  d.n = 500;
  d.reps = 100;
  d.seed = 5;
  const auto s = run_study(d, quick_options(1));
  CHECK(pearson(s.series("snp:x1"), s.series("ols:x1")) > 0.95);
  CHECK(std::abs(s.parameter("snp", "x1").bias) < 0.02);
}

TEST_CASE("empirical-like sample shape") {
  const SampleData d = generate_empirical_like(2000, 5, 4);
  CHECK(d.x.minCoeff() >= 0.0);
  CHECK(d.x.maxCoeff() <= 1.13);
  CHECK(d.y.minCoeff() > -0.5);
  CHECK(d.y.maxCoeff() < 1.0);
  REQUIRE(d.z);
  CHECK(d.z->cols() == 4);
  CHECK(d.z_labels.front() == "region2");
  CHECK(d.z->colwise().sum().minCoeff() == 400.0);
}
