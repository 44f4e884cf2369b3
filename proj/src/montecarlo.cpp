#include "rcsieve/montecarlo.hpp"

#include "detail/parallel.hpp"
#include "rcsieve/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rcsieve {

namespace {

constexpr std::uint64_t kRegressorStream = 0x58;
constexpr std::uint64_t kErrorStream = 0x45;
constexpr std::uint64_t kSelectionStream = 0xc5;

const boost::math::normal_distribution<double> kStdNormal;

double phi(double x) { return boost::math::pdf(kStdNormal, x); }
double cdf(double x) { return boost::math::cdf(kStdNormal, x); }

template <class F>
double gauss(F f, double lo, double hi) {
  return boost::math::quadrature::gauss<double, 64>::integrate(f, lo, hi);
}

// E f(X1, X2) for the standard bivariate normal with correlation rho
// restricted to box x box.
template <class F>
double box_expectation(F f, double rho, Interval box) {
  const double c = 1.0 / (2.0 * (1.0 - rho * rho));
  auto density = [&](double a, double b) { return std::exp(-c * (a * a - 2.0 * rho * a * b + b * b)); };
  auto integrate = [&](auto g) {
    return gauss([&](double a) { return gauss([&](double b) { return g(a, b) * density(a, b); },
                                              box.lo, box.hi); },
                 box.lo, box.hi);
  };
  const double mass = integrate([](double, double) { return 1.0; });
  return integrate(f) / mass;
}

Eigen::MatrixXd product_grid(const Eigen::VectorXd& g, int p) {
  if (p == 1) return g;
  Eigen::MatrixXd out(g.size() * g.size(), 2);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    for (Eigen::Index j = 0; j < g.size(); ++j, ++r) out.row(r) << g(i), g(j);
  }
  return out;
}

// E[zeta - 1 | X = x] in the instrument design, X = 1 + 1.5 Z + (zeta - 1).
double d3_conditional_mean(double x, Interval zb) {
  auto w = [&](double z) { return phi(z) * phi(x - 1.0 - 1.5 * z); };
  const double num = gauss([&](double z) { return (x - 1.0 - 1.5 * z) * w(z); }, zb.lo, zb.hi);
  const double den = gauss(w, zb.lo, zb.hi);
  return num / den;
}

struct BivariateTruth {
  double d1, d2, a12, a21;
};

BivariateTruth bivariate_truth(double rho, Interval box) {
  auto q = [](double a, double b) { return 1.5 * (a * a + b * b); };
  auto g = [](double a, double b) { return std::exp(a) + std::exp(b); };
  const double e1 = box_expectation([](double a, double) { return a; }, rho, box);
  const double e2 = box_expectation([](double, double b) { return b; }, rho, box);
  const double v1 = box_expectation([](double a, double) { return a * a; }, rho, box) - e1 * e1;
  const double v2 = box_expectation([](double, double b) { return b * b; }, rho, box) - e2 * e2;
  const double eq = box_expectation(q, rho, box);
  const double eg = box_expectation(g, rho, box);
  const double cov2q = box_expectation([&](double a, double b) { return b * q(a, b); }, rho, box) - e2 * eq;
  const double cov1g = box_expectation([&](double a, double b) { return a * g(a, b); }, rho, box) - e1 * eg;
  BivariateTruth t{};
  t.a12 = cov2q / v2;
  t.a21 = cov1g / v1;
  t.d1 = eq - t.a12 * e2;
  t.d2 = eg - t.a21 * e1;
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------

Eigen::VectorXd sample_truncnorm(Eigen::Index n, double mean, double sd, Interval bounds, Rng& rng) {
  if (!(bounds.lo < bounds.hi)) throw DomainError("truncation bounds need lo < hi");
  if (!(sd > 0.0)) throw DomainError("truncated normal needs sd > 0");
  if (n < 0) throw ShapeError("negative sample size");
  const double a = (bounds.lo - mean) / sd;
  const double b = (bounds.hi - mean) / sd;
  const double pa = cdf(a);
  const double pb = cdf(b);
  if (!(pb - pa >= 1e-12)) {
    throw DegenerateTruncationError("truncation interval carries normal mass below 1e-12");
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = pa + uniform_open(rng) * (pb - pa);
    const double z = boost::math::quantile(kStdNormal, std::clamp(u, pa, pb));
    out(i) = std::clamp(mean + sd * z, bounds.lo, bounds.hi);
  }
  return out;
}

Eigen::VectorXd sample_truncnorm(Eigen::Index n, double mean, double sd, Interval bounds,
                                 std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0, kRegressorStream);
  return sample_truncnorm(n, mean, sd, bounds, rng);
}

double truncnorm_second_moment(Interval bounds) {
  const double mass = cdf(bounds.hi) - cdf(bounds.lo);
  return 1.0 + (bounds.lo * phi(bounds.lo) - bounds.hi * phi(bounds.hi)) / mass;
}

double truncnorm_variance(Interval bounds) {
  const double mass = cdf(bounds.hi) - cdf(bounds.lo);
  const double mean = (phi(bounds.lo) - phi(bounds.hi)) / mass;
  return truncnorm_second_moment(bounds) - mean * mean;
}

BivariateSample sample_truncnorm_bivariate(Eigen::Index n, double rho, Interval bounds, Rng& rng) {
  if (!(std::abs(rho) < 1.0)) throw DomainError("bivariate correlation must satisfy |rho| < 1");
  if (!(bounds.lo < bounds.hi)) throw DomainError("truncation bounds need lo < hi");
  if (n < 0) throw ShapeError("negative sample size");
  const double tail = std::sqrt(1.0 - rho * rho);
  BivariateSample out;
  out.values.resize(n, 2);
  Eigen::Index accepted = 0;
  std::uint64_t tried = 0;
  // Give up once enough proposals have been made to tell the rate is too low.
  const std::uint64_t probe = 100000;
  while (accepted < n) {
    const double a = standard_normal(rng);
    const double b = rho * a + tail * standard_normal(rng);
    ++tried;
    if (bounds.contains(a) && bounds.contains(b)) out.values.row(accepted++) << a, b;
    if (tried >= probe && static_cast<double>(accepted) < 1e-3 * static_cast<double>(tried)) {
      throw DegenerateTruncationError("bivariate truncation acceptance rate below 1e-3");
    }
  }
  out.acceptance_rate = tried > 0 ? static_cast<double>(accepted) / static_cast<double>(tried) : 1.0;
  return out;
}

BivariateSample sample_truncnorm_bivariate(Eigen::Index n, double rho, Interval bounds,
                                           std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0, kRegressorStream);
  return sample_truncnorm_bivariate(n, rho, bounds, rng);
}

// ---------------------------------------------------------------------------

std::string to_string(DesignId id) {
  switch (id) {
    case DesignId::d1_uni: return "d1_uni";
    case DesignId::d1_biv: return "d1_biv";
    case DesignId::d2_uni: return "d2_uni";
    case DesignId::d2_biv: return "d2_biv";
    case DesignId::d3_iv: return "d3_iv";
  }
  return "unknown";
}

DesignId parse_design_id(const std::string& name) {
  for (auto id : {DesignId::d1_uni, DesignId::d1_biv, DesignId::d2_uni, DesignId::d2_biv,
                  DesignId::d3_iv}) {
    if (to_string(id) == name) return id;
  }
  throw ConfigError("unknown design '" + name + "'");
}

int SimDesign::p() const { return (id == DesignId::d1_biv || id == DesignId::d2_biv) ? 2 : 1; }

void SimDesign::validate() const {
  if (n < 50) throw ConfigError("simulation designs need n >= 50");
  if (reps < 1) throw ConfigError("need at least one replication");
  if (!(bounds.lo < bounds.hi)) throw ConfigError("truncation bounds need lo < hi");
  if (!(std::abs(rho_x) < 1.0)) throw ConfigError("rho_x must satisfy |rho_x| < 1");
  if (grid_points < 1 || !(grid_lo <= grid_hi)) throw ConfigError("invalid evaluation grid");
  if (!(std::abs(beta_zeta_cov) < 1.0)) throw ConfigError("beta_zeta_cov must satisfy |cov| < 1");
}

TruthSpec design_truth(const SimDesign& design) {
  design.validate();
  TruthSpec t;
  const Eigen::VectorXd g = linspace(design.grid_lo, design.grid_hi, design.grid_points);
  t.grid = product_grid(g, design.p());
  const Eigen::Index m = t.grid.rows();
  std::ostringstream notes;
  notes.precision(10);

  switch (design.id) {
    case DesignId::d1_uni: {
      const double m2 = truncnorm_second_moment(design.bounds);
      t.labels = {"const", "x1"};
      t.delta = Eigen::Vector2d(0.0, 2.0 * m2);
      t.b_true.push_back((2.0 * t.grid.col(0).array().square() - 2.0 * m2).matrix());
      notes << "delta1 = 2 E[X^2] = " << 2.0 * m2 << "; b(x) = 2x^2 - 2E[X^2]";
      break;
    }
    case DesignId::d1_biv: {
      const auto bt = bivariate_truth(design.rho_x, design.bounds);
      t.labels = {"const", "x1", "x2", "x1*x2"};
      t.delta.resize(4);
      t.delta << 0.0, bt.d1, bt.d2, bt.a12 + bt.a21;
      const auto x1 = t.grid.col(0).array();
      const auto x2 = t.grid.col(1).array();
      t.b_true.push_back((1.5 * (x1.square() + x2.square()) - bt.d1 - bt.a12 * x2).matrix());
      t.b_true.push_back((x1.exp() + x2.exp() - bt.d2 - bt.a21 * x1).matrix());
      notes << "quadrature at rho_x = " << design.rho_x << ": a12 = " << bt.a12
            << ", a21 = " << bt.a21;
      break;
    }
    case DesignId::d2_uni:
      t.labels = {"const", "x1"};
      t.delta = Eigen::Vector2d(0.0, 0.835);
      t.b_true.push_back(Eigen::VectorXd::Zero(m));
      notes << "beta ~ N(0.835, 0.835^2) independent of X";
      break;
    case DesignId::d2_biv:
      t.labels = {"const", "x1", "x2", "x1*x2"};
      t.delta.resize(4);
      t.delta << 0.0, 0.835, 2.291, 0.0;
      t.b_true.assign(2, Eigen::VectorXd::Zero(m));
      notes << "beta1 ~ N(0.835, 0.835^2), beta2 ~ N(2.291, 2.291^2) independent of X";
      break;
    case DesignId::d3_iv: {
      t.labels = {"const", "x1"};
      t.delta = Eigen::Vector2d(0.0, 1.0);
      Eigen::VectorXd b(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        b(i) = design.beta_zeta_cov * d3_conditional_mean(t.grid(i, 0), design.bounds);
      }
      t.b_true.push_back(std::move(b));
      notes << "b(x) = " << design.beta_zeta_cov << " E[zeta - 1 | X = x]; OLS plim bias "
            << design.beta_zeta_cov / (2.25 * truncnorm_variance(design.bounds) + 1.0);
      break;
    }
  }
  t.notes = notes.str();
  return t;
}

SimDataset generate(const SimDesign& design, int rep) {
  design.validate();
  const Eigen::Index n = design.n;
  const auto x_index = static_cast<std::uint64_t>(design.redraw_x ? rep : 0);
  Rng rx = derive_rng(design.seed, x_index, kRegressorStream);
  Rng re = derive_rng(design.seed, static_cast<std::uint64_t>(rep), kErrorStream);

  SimDataset ds;
  SampleData& d = ds.data;
  d.y.resize(n);
  d.x_labels = default_labels("x", design.p());

  switch (design.id) {
    case DesignId::d1_uni: {
      const double m2 = truncnorm_second_moment(design.bounds);
      d.x = sample_truncnorm(n, 0.0, 1.0, design.bounds, rx);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x = d.x(i, 0);
        const double b = 2.0 * x * x - 2.0 * m2;
        const double u = x * std::exp(0.25 * x) * standard_normal(re);
        d.y(i) = 2.0 * m2 * x + x * b + u;
      }
      break;
    }
    case DesignId::d1_biv: {
      d.x = sample_truncnorm_bivariate(n, design.rho_x, design.bounds, rx).values;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x1 = d.x(i, 0);
        const double x2 = d.x(i, 1);
        const double s1 = std::exp(0.125 * (x1 + x2));
        const double s2 = 0.5 * std::abs(x1 + x2);
        const double r = x1 * x2;
        const double z1 = standard_normal(re);
        const double z2 = standard_normal(re);
        const double e1 = s1 * z1;
        const double e2 = s2 * (r * z1 + std::sqrt(std::max(0.0, 1.0 - r * r)) * z2);
        d.y(i) = x1 * 1.5 * (x1 * x1 + x2 * x2) + x2 * (std::exp(x1) + std::exp(x2)) + x1 * e1 +
                 x2 * e2;
      }
      break;
    }
    case DesignId::d2_uni: {
      d.x = sample_truncnorm(n, 0.0, 1.0, design.bounds, rx);
      for (Eigen::Index i = 0; i < n; ++i) {
        d.y(i) = d.x(i, 0) * (0.835 + 0.835 * standard_normal(re));
      }
      break;
    }
    case DesignId::d2_biv: {
      d.x = sample_truncnorm_bivariate(n, design.rho_x, design.bounds, rx).values;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double b1 = 0.835 + 0.835 * standard_normal(re);
        const double b2 = 2.291 + 2.291 * standard_normal(re);
        d.y(i) = d.x(i, 0) * b1 + d.x(i, 1) * b2;
      }
      break;
    }
    case DesignId::d3_iv: {
      const Eigen::VectorXd z = sample_truncnorm(n, 0.0, 1.0, design.bounds, rx);
      d.x.resize(n, 1);
      const double rho = design.beta_zeta_cov;
      const double tail = std::sqrt(1.0 - rho * rho);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double e1 = standard_normal(re);
        const double e2 = standard_normal(re);
        const double eta = standard_normal(re);
        const double beta = 1.0 + e1;
        const double zeta = 1.0 + rho * e1 + tail * e2;
        d.x(i, 0) = 1.5 * z(i) + zeta;
        d.y(i) = d.x(i, 0) * beta + 0.25 * eta;
      }
      ds.instrument = z;
      break;
    }
  }
  return ds;
}

std::vector<Interval> design_domains(const SimDesign& design, const SampleData& data) {
  if (design.id != DesignId::d3_iv) {
    return std::vector<Interval>(static_cast<std::size_t>(design.p()), design.bounds);
  }
  auto d = empirical_domains(data.x);
  for (auto& iv : d) iv = {std::min(iv.lo, design.grid_lo), std::max(iv.hi, design.grid_hi)};
  return d;
}

SampleData generate_empirical_like(Eigen::Index n, int regions, std::uint64_t seed) {
  if (n < 1) throw ShapeError("need n >= 1");
  if (regions < 1) throw ConfigError("need at least one region");
  Rng rng = derive_rng(seed, 0, 0xe1);
  SampleData d;
  d.y.resize(n);
  d.x.resize(n, 1);
  d.x_labels = {"malaria"};
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, regions - 1);
  for (int r = 1; r < regions; ++r) d.z_labels.push_back("region" + std::to_string(r + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    // Cycle through regions so every dummy has support.
    const int region = static_cast<int>(i % regions);
    if (region > 0) z(i, region - 1) = 1.0;
    const double x = std::clamp(0.2 + 0.35 * standard_normal(rng), 0.0, 1.13);
    const double slope = 0.15 - 0.1 * x + 0.05 * standard_normal(rng);
    const double shift = 0.03 * (region - 0.5 * (regions - 1)) / regions;
    d.x(i, 0) = x;
    d.y(i) = 0.02 + x * slope + shift + 0.08 * standard_normal(rng);
  }
  if (regions > 1) d.z = std::move(z);
  return d;
}

// ---------------------------------------------------------------------------

const ParameterSummary& RepSummary::parameter(const std::string& estimator,
                                              const std::string& label) const {
  for (const auto& p : parameters) {
    if (p.estimator == estimator && p.label == label) return p;
  }
  throw ConfigError("no summary for " + estimator + ":" + label);
}

double RepSummary::mase_of(const std::string& label) const {
  for (std::size_t i = 0; i < mase_labels.size(); ++i) {
    if (mase_labels[i] == label) return mase[i];
  }
  throw ConfigError("no MASE for " + label);
}

std::vector<double> RepSummary::series(const std::string& key) const {
  std::vector<double> out;
  for (const auto& r : replications) {
    if (!r.ok) continue;
    const auto it = std::find(r.keys.begin(), r.keys.end(), key);
    if (it == r.keys.end()) throw ConfigError("no estimates for " + key);
    out.push_back(r.estimates[static_cast<std::size_t>(it - r.keys.begin())]);
  }
  return out;
}

ReplicationResult run_replication(const SimDesign& design, const TruthSpec& truth,
                                  const StudyOptions& options, int rep) {
  ReplicationResult out;
  out.rep = rep;
  try {
    const SimDataset ds = generate(design, rep);
    ModelSpec model = options.estimator.model;
    model.domains = design_domains(design, ds.data);
    if (options.estimator.fixed_order) {
      model.order = *options.estimator.fixed_order;
    } else {
      CvOptions cv = options.estimator.cv;
      cv.fit = options.estimator.fit;
      cv.seed = derive_rng(cv.seed ^ design.seed, static_cast<std::uint64_t>(rep), kSelectionStream)();
      model.order = cross_validate(ds.data, model, cv).chosen;
    }
    out.order = model.order;

    const DesignMatrices dm = build_design(ds.data, model);
    const FitResult fit = profile_fit(dm, options.estimator.fit);
    const Eigen::VectorXd se = fit.standard_errors();
    for (std::size_t k = 0; k < fit.delta_labels.size(); ++k) {
      out.keys.push_back("snp:" + fit.delta_labels[k]);
      out.estimates.push_back(fit.delta_hat(static_cast<Eigen::Index>(k)));
    }
    out.snp_se = se;
    out.studentized = (fit.delta_hat - truth.delta).cwiseQuotient(se);

    const auto est = evaluate_b(fit, dm, truth.grid);
    for (std::size_t j = 0; j < truth.b_true.size(); ++j) {
      out.ase.push_back((est.aggregates[j].values - truth.b_true[j]).squaredNorm() /
                        static_cast<double>(truth.grid.rows()));
    }

    for (const auto method : options.comparators) {
      if (method == ComparatorMethod::ols) {
        Eigen::MatrixXd cols(ds.data.n(), 1 + ds.data.x.cols());
        cols << Eigen::VectorXd::Ones(ds.data.n()), ds.data.x;
        std::vector<std::string> labels{"const"};
        labels.insert(labels.end(), ds.data.x_labels.begin(), ds.data.x_labels.end());
        const auto c = fit_ols(ds.data.y, cols, labels);
        for (std::size_t k = 0; k < labels.size(); ++k) {
          out.keys.push_back("ols:" + labels[k]);
          out.estimates.push_back(c.coefficients(static_cast<Eigen::Index>(k)));
        }
      } else {
        if (!ds.instrument) throw ConfigError("control function needs an instrument");
        const auto c = fit_control_function(ds.data.y, ds.data.x.col(0), *ds.instrument);
        out.keys.push_back("cf:const");
        out.estimates.push_back(c.coefficient("const"));
        out.keys.push_back("cf:x1");
        out.estimates.push_back(c.coefficient("x"));
      }
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.error = e.kind() + ": " + e.what();
    out.keys.clear();
    out.estimates.clear();
  }
  return out;
}

RepSummary summarize(const SimDesign& design, const TruthSpec& truth,
                     std::vector<ReplicationResult> reps, double max_failure_rate) {
  std::sort(reps.begin(), reps.end(), [](const auto& a, const auto& b) { return a.rep < b.rep; });
  RepSummary s;
  s.design = design;
  s.truth = truth;
  s.studentized_labels = truth.labels;

  std::vector<const ReplicationResult*> good;
  for (const auto& r : reps) {
    if (r.ok) {
      good.push_back(&r);
    } else {
      ++s.failures;
    }
  }
  if (static_cast<double>(s.failures) > max_failure_rate * static_cast<double>(reps.size())) {
    std::ostringstream os;
    os << s.failures << " of " << reps.size() << " replications failed";
    for (const auto& r : reps) {
      if (!r.ok) {
        os << " (first: replication " << r.rep << ": " << r.error << ")";
        break;
      }
    }
    throw StudyFailureError(os.str());
  }
  if (good.empty()) throw StudyFailureError("no successful replications");

  const auto count = static_cast<double>(good.size());
  const auto& keys = good.front()->keys;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto colon = keys[k].find(':');
    ParameterSummary ps;
    ps.estimator = keys[k].substr(0, colon);
    ps.label = keys[k].substr(colon + 1);
    const auto it = std::find(truth.labels.begin(), truth.labels.end(), ps.label);
    if (it == truth.labels.end()) continue;
    ps.truth = truth.delta(it - truth.labels.begin());
    double sum = 0.0;
    for (const auto* r : good) sum += r->estimates[k];
    ps.mean = sum / count;
    double ss = 0.0;
    for (const auto* r : good) ss += (r->estimates[k] - ps.mean) * (r->estimates[k] - ps.mean);
    ps.se = std::sqrt(ss / count);
    ps.bias = ps.mean - ps.truth;
    ps.rmse = std::sqrt(ps.bias * ps.bias + ps.se * ps.se);
    s.parameters.push_back(ps);
  }

  for (std::size_t j = 0; j < truth.b_true.size(); ++j) {
    s.mase_labels.push_back("b[" + std::to_string(j + 1) + "]");
    double sum = 0.0;
    for (const auto* r : good) sum += r->ase[j];
    s.mase.push_back(sum / count);
  }

  s.studentized.resize(static_cast<Eigen::Index>(good.size()), truth.delta.size());
  for (std::size_t i = 0; i < good.size(); ++i) {
    s.studentized.row(static_cast<Eigen::Index>(i)) = good[i]->studentized.transpose();
    s.chosen_orders.push_back(good[i]->order);
  }
  s.replications = std::move(reps);
  return s;
}

RepSummary run_study(const SimDesign& design, const StudyOptions& options) {
  design.validate();
  for (const auto m : options.comparators) {
    if (m == ComparatorMethod::control_function && design.id != DesignId::d3_iv) {
      throw ConfigError("the control function comparator needs the instrument design");
    }
  }
  const TruthSpec truth = design_truth(design);
  std::vector<ReplicationResult> reps(static_cast<std::size_t>(design.reps));
  detail::parallel_for(reps.size(), options.threads, [&](std::size_t r) {
    reps[r] = run_replication(design, truth, options, static_cast<int>(r));
  });
  return summarize(design, truth, std::move(reps), options.max_failure_rate);
}

}  // namespace rcsieve
