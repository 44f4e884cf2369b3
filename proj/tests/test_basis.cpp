#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "rcsieve/basis.hpp"
#include "rcsieve/errors.hpp"
#include "rcsieve/montecarlo.hpp"

using namespace rcsieve;

namespace {

// |<c, m>| / (|c| |m|) for every constrained column c and constraint column m.
double worst_moment(const ConstrainedBasis& b, const ConstraintSet& cs) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < b.effective_columns(); ++k) {
    const Eigen::VectorXd c = b.columns().col(k);
    for (Eigen::Index m = 0; m < cs.columns.cols(); ++m) {
      const double v = std::abs(c.dot(cs.columns.col(m))) / (c.norm() * cs.columns.col(m).norm());
      worst = std::max(worst, v);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("polynomial raw basis holds powers without a constant") {
  BasisSpec spec{BasisFamily::polynomial, 2, {}, {-1.0, 1.0}};
  Eigen::MatrixXd r = build_raw_basis(spec, Eigen::VectorXd::Zero(1));
  CHECK(r.cols() == 2);
  CHECK(r(0, 0) == 0.0);
  CHECK(r(0, 1) == 0.0);

  spec.order = 3;
  r = build_raw_basis(spec, Eigen::VectorXd::Constant(1, 0.5));
  CHECK(r(0, 0) == doctest::Approx(0.5));
  CHECK(r(0, 1) == doctest::Approx(0.25));
  CHECK(r(0, 2) == doctest::Approx(0.125));
}

TEST_CASE("raw basis rejects points outside the domain and empty input") {
  BasisSpec spec{BasisFamily::polynomial, 2, {}, {-1.0, 1.0}};
  CHECK_THROWS_AS(build_raw_basis(spec, Eigen::VectorXd::Constant(1, 1.0001)), DomainError);
  CHECK_THROWS_AS(build_raw_basis(spec, Eigen::VectorXd(0)), EmptyInputError);
  spec.order = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("cubic B-splines match the Cox-de Boor recursion and sum to one") {
  BasisSpec spec{BasisFamily::bspline, 4, {0.0}, {-1.0, 1.0}};
  CHECK(spec.spline_degree() == 3);
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(201, -1.0, 1.0);
  const std::vector<double> xs(grid.data(), grid.data() + grid.size());
  const Eigen::MatrixXd full = bspline_full_basis(spec, xs);
  REQUIRE(full.cols() == 5);
  const auto knots = oracle::clamped_knots(-1.0, 1.0, {0.0}, 3);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    CHECK(full.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 0; k < 5; ++k) {
      CHECK(full(i, k) == doctest::Approx(oracle::cox_de_boor(k, 3, knots, grid(i))).epsilon(1e-12));
    }
  }
  const Eigen::MatrixXd raw = build_raw_basis(spec, grid);
  CHECK(raw.cols() == 4);
  CHECK((raw - full.rightCols(4)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("uniform interior knots when none are given") {
  BasisSpec spec{BasisFamily::bspline, 6, {}, {0.0, 3.0}};
  const auto k = spec.interior_knots();
  REQUIRE(k.size() == 3);
  CHECK(k[0] == doctest::Approx(0.75));
  CHECK(k[1] == doctest::Approx(1.5));
  CHECK(k[2] == doctest::Approx(2.25));
  spec.knots = {1.0, 0.5};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.knots = {1.0, 0.5, 2.0};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("p = 1 constraint is centering only") {
  Rng rng = derive_rng(11, 0);
  const Eigen::MatrixXd x = oracle::uniform_matrix(200, 1, rng);
  Eigen::MatrixXd raw(200, 2);
  raw << x.col(0), x.col(0).array().square().matrix();
  const ConstraintSet cs = ConstraintSet::for_pair(x, 0, 0);
  CHECK(cs.columns.cols() == 1);
  const ConstrainedBasis b = constrain_basis(raw, cs);
  REQUIRE(b.effective_columns() == 2);
  const Eigen::MatrixXd centered = raw.rowwise() - raw.colwise().mean();
  CHECK((b.columns() - centered).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(std::abs(b.columns().col(0).mean()) < 1e-14);
  CHECK(std::abs(b.columns().col(1).mean()) < 1e-14);
}

TEST_CASE("off-diagonal linear column is annihilated") {
  Rng rng = derive_rng(12, 0);
  const Eigen::MatrixXd x = oracle::uniform_matrix(100, 2, rng);
  const ConstraintSet cs = ConstraintSet::for_pair(x, 1, 0);
  REQUIRE(cs.columns.cols() == 2);
  CHECK((cs.columns.col(1) - x.col(0)).norm() == 0.0);
  const ConstrainedBasis b = constrain_basis(x.col(0), cs);
  CHECK(b.effective_columns() == 0);
}

TEST_CASE("diagonal pair on a truncated normal sample satisfies both moments") {
  const auto draw = sample_truncnorm_bivariate(500, 0.0, {-1.0, 1.0}, std::uint64_t{5});
  const Eigen::MatrixXd& x = draw.values;
  Eigen::MatrixXd raw(500, 2);
  raw << x.col(0), x.col(0).array().square().matrix();
  const ConstraintSet cs = ConstraintSet::for_pair(x, 0, 0);
  const ConstrainedBasis b = constrain_basis(raw, cs);
  REQUIRE(b.effective_columns() == 2);
  for (Eigen::Index k = 0; k < 2; ++k) {
    const Eigen::VectorXd c = b.columns().col(k);
    const double scale = c.norm() / std::sqrt(500.0);
    CHECK(std::abs(c.mean()) <= 1e-10 * scale);
    CHECK(std::abs(c.cwiseProduct(x.col(1)).mean()) <= 1e-10 * scale);
  }
}

TEST_CASE("constraint sets exclude the target and include the argument off the diagonal") {
  Rng rng = derive_rng(13, 0);
  const Eigen::MatrixXd x = oracle::uniform_matrix(50, 3, rng);
  const ConstraintSet cs = ConstraintSet::for_pair(x, 1, 2);
  CHECK(cs.regressors == std::vector<int>{0, 2});
  CHECK((cs.columns.col(0).array() == 1.0).all());
  CHECK(cs.structural_annihilation_possible());
  CHECK_FALSE(ConstraintSet::for_pair(x, 2, 2).structural_annihilation_possible());
}

TEST_CASE("random samples: every constrained column meets its moments") {
  for (int rep = 0; rep < 200; ++rep) {
    Rng rng = derive_rng(1000, static_cast<std::uint64_t>(rep));
    const int p = 1 + rep % 3;
    const int k = 1 + rep % 5;
    const Eigen::MatrixXd x = oracle::uniform_matrix(120, p, rng);
    const auto family = rep % 2 ? BasisFamily::bspline : BasisFamily::polynomial;
    for (int a = 0; a < p; ++a) {
      BasisSpec spec{family, k, {}, {-1.0, 1.0}};
      for (int t = 0; t < p; ++t) {
        const ConstrainedBasis b = make_constrained_basis(spec, x, t, a);
        CHECK(worst_moment(b, ConstraintSet::for_pair(x, t, a)) <= 1e-10);
        CHECK(b.effective_columns() <= k);
        if (t != a && family == BasisFamily::polynomial) CHECK(b.effective_columns() == k - 1);
      }
    }
  }
}

TEST_CASE("constraining twice changes nothing") {
  Rng rng = derive_rng(14, 0);
  const Eigen::MatrixXd x = oracle::uniform_matrix(300, 2, rng);
  BasisSpec spec{BasisFamily::polynomial, 4, {}, {-1.0, 1.0}};
  const ConstraintSet cs = ConstraintSet::for_pair(x, 0, 1);
  const ConstrainedBasis once = constrain_basis(build_raw_basis(spec, Eigen::VectorXd(x.col(1))), cs);
  const ConstrainedBasis twice = constrain_basis(once.columns(), cs);
  REQUIRE(twice.effective_columns() == once.effective_columns());
  CHECK((twice.columns() - once.columns()).norm() <= 1e-12 * once.columns().norm());
}

TEST_CASE("span of the constrained basis is invariant to raw reparameterization") {
  Rng rng = derive_rng(15, 0);
  const Eigen::MatrixXd x = oracle::uniform_matrix(250, 2, rng);
  BasisSpec spec{BasisFamily::polynomial, 3, {}, {-1.0, 1.0}};
  const Eigen::MatrixXd raw = build_raw_basis(spec, Eigen::VectorXd(x.col(0)));
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3) + 0.3 * oracle::uniform_matrix(3, 3, rng);
  for (int t = 0; t < 2; ++t) {
    const ConstraintSet cs = ConstraintSet::for_pair(x, t, 0);
    const ConstrainedBasis b1 = constrain_basis(raw, cs);
    const ConstrainedBasis b2 = constrain_basis(raw * a, cs);
    REQUIRE(b1.effective_columns() == b2.effective_columns());
    CHECK((oracle::projector(b1.columns()) - oracle::projector(b2.columns())).cwiseAbs().maxCoeff() <
          1e-10);
  }
}

TEST_CASE("degenerate and undersized bases raise") {
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(40, 1);
  CHECK_THROWS_AS(constrain_basis(ones, ConstraintSet::centering(40)), DegenerateBasisError);
  const Eigen::MatrixXd x = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
  Eigen::MatrixXd raw(4, 3);
  raw << x, x.array().square().matrix(), x.array().cube().matrix();
  CHECK_THROWS_AS(constrain_basis(raw, ConstraintSet::centering(4)), ShapeError);
  CHECK_THROWS_AS(constrain_basis(raw, ConstraintSet::centering(5)), ShapeError);
}

TEST_CASE("evaluate reproduces the construction columns") {
  Rng rng = derive_rng(16, 0);
  const Eigen::MatrixXd x = oracle::uniform_matrix(150, 2, rng);
  for (auto family : {BasisFamily::polynomial, BasisFamily::bspline}) {
    BasisSpec spec{family, 4, {}, {-1.0, 1.0}};
    for (int t = 0; t < 2; ++t) {
      for (int a = 0; a < 2; ++a) {
        const ConstrainedBasis b = make_constrained_basis(spec, x, t, a);
        CHECK((b.evaluate(x) - b.columns()).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("sieve block layout and products") {
  Rng rng = derive_rng(17, 0);
  const Eigen::MatrixXd x1 = oracle::uniform_matrix(80, 1, rng);
  BasisSpec spec{BasisFamily::polynomial, 2, {}, {-1.0, 1.0}};
  const std::vector<ConstrainedBasis> one{make_constrained_basis(spec, x1, 0, 0, false)};
  const SieveBlock s1 = assemble_sieve_block(x1, one);
  REQUIRE(s1.cols() == 2);
  const Eigen::VectorXd expect = x1.col(0).cwiseProduct((x1.col(0).array() - x1.col(0).mean()).matrix());
  CHECK((s1.s.col(0) - expect).cwiseAbs().maxCoeff() < 1e-14);

  // p = 2 with K_eff = 2 everywhere: cubic raw basis, one column lost off the diagonal.
  const Eigen::MatrixXd x2 = oracle::uniform_matrix(80, 2, rng);
  std::vector<ConstrainedBasis> bases;
  for (int a = 0; a < 2; ++a) {
    for (int t = 0; t < 2; ++t) {
      BasisSpec sp{BasisFamily::polynomial, t == a ? 2 : 3, {}, {-1.0, 1.0}};
      bases.push_back(make_constrained_basis(sp, x2, t, a));
      CHECK(bases.back().effective_columns() == 2);
    }
  }
  const SieveBlock s2 = assemble_sieve_block(x2, bases);
  CHECK(s2.cols() == 8);
  const std::vector<std::pair<int, int>> order{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s2.layout[i].target == order[i].first);
    CHECK(s2.layout[i].argument == order[i].second);
    CHECK(s2.layout[i].begin == static_cast<Eigen::Index>(2 * i));
    CHECK(s2.layout[i].count == 2);
  }
  CHECK_THROWS_AS(assemble_sieve_block(x2.topRows(40), bases), ShapeError);
}

TEST_CASE("S * pi equals the naive per-row sum") {
  for (int rep = 0; rep < 20; ++rep) {
    Rng rng = derive_rng(2000, static_cast<std::uint64_t>(rep));
    const int p = 1 + rep % 2;
    const Eigen::MatrixXd x = oracle::uniform_matrix(60, p, rng);
    BasisSpec spec{rep % 3 ? BasisFamily::polynomial : BasisFamily::bspline, 3, {}, {-1.0, 1.0}};
    std::vector<ConstrainedBasis> bases;
    for (int a = 0; a < p; ++a) {
      for (int t = 0; t < p; ++t) bases.push_back(make_constrained_basis(spec, x, t, a));
    }
    const SieveBlock s = assemble_sieve_block(x, bases);
    const Eigen::VectorXd pi = oracle::normal_vector(s.cols(), rng);
    const Eigen::VectorXd fast = s.s * pi;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double naive = 0.0;
      Eigen::Index offset = 0;
      for (const auto& b : bases) {
        const Eigen::RowVectorXd psi = b.evaluate(x.row(i));
        for (Eigen::Index k = 0; k < psi.size(); ++k) naive += x(i, b.target()) * psi(k) * pi(offset + k);
        offset += psi.size();
      }
      CHECK(std::abs(fast(i) - naive) <= 1e-12 * std::max(1.0, std::abs(naive)));
    }
  }
}

TEST_CASE("control block multiplies a centered basis by each control") {
  Rng rng = derive_rng(18, 0);
  const Eigen::MatrixXd x = oracle::uniform_matrix(90, 1, rng);
  Eigen::MatrixXd z(90, 1);
  for (Eigen::Index i = 0; i < 90; ++i) z(i, 0) = i % 3 == 0 ? 1.0 : 0.0;
  BasisSpec spec{BasisFamily::polynomial, 2, {}, {-1.0, 1.0}};
  const std::vector<ConstrainedBasis> bases{make_constrained_basis(spec, x, -1, 0, false)};
  CHECK(std::abs(bases[0].columns().col(0).mean()) < 1e-14);
  const SieveBlock c = control_sieve_rows(x, z, bases);
  REQUIRE(c.cols() == 2);
  CHECK((c.s - z.col(0).asDiagonal() * bases[0].columns()).cwiseAbs().maxCoeff() < 1e-14);
}
