#include "rcsieve/selection.hpp"

#include "detail/parallel.hpp"
#include "rcsieve/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace rcsieve {

CvReport cross_validate(const SampleData& data, const ModelSpec& spec, const CvOptions& options) {
  if (options.k_grid.empty()) throw SelectionError("empty grid of basis orders");
  const Eigen::Index n = data.n();
  const int folds = (options.folds == 0 || options.folds >= n) ? static_cast<int>(n) : options.folds;
  if (folds < 2) throw SelectionError("cross-validation needs at least 2 folds");

  ModelSpec resolved = spec;
  if (resolved.domains.empty()) resolved.domains = empirical_domains(data.x);

  const Eigen::Index p = data.x.cols();
  const Eigen::Index q = data.z ? data.z->cols() : 0;
  const int k_max = *std::max_element(options.k_grid.begin(), options.k_grid.end());
  const Eigen::Index min_train = n - (n + folds - 1) / folds;
  const Eigen::Index width = 1 + p + p * (p - 1) / 2 + q + (p * p + p * q) * k_max;
  if (min_train <= width) {
    std::ostringstream os;
    os << "training folds of " << min_train << " rows cannot support " << width << " columns";
    throw SelectionError(os.str());
  }

  CvReport report;
  report.k_grid = options.k_grid;
  report.folds = folds;
  report.seed = options.seed;
  report.fold_of.resize(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = derive_rng(options.seed, 0, 0xcf);
  // Fisher-Yates on our own uniform draws so fold assignment is portable.
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    report.fold_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % folds);
  }

  std::vector<std::vector<Eigen::Index>> train(folds), test(folds);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int f = report.fold_of[static_cast<std::size_t>(i)];
    for (int g = 0; g < folds; ++g) (g == f ? test[g] : train[g]).push_back(i);
  }

  for (const int k : options.k_grid) {
    ModelSpec candidate = resolved;
    candidate.order = k;
    double sse = 0.0;
    bool ok = true;
    for (int f = 0; f < folds && ok; ++f) {
      try {
        const SampleData tr = data.subset(train[f]);
        const SampleData te = data.subset(test[f]);
        const DesignMatrices design = build_design(tr, candidate);
        const ProfileSolver solver(design, options.fit);
        const auto coef = solver.solve(design.y);
        const Eigen::VectorXd pred = design.parametric_rows(te.x, te.z) * coef.delta +
                                     design.nonparametric_rows(te.x, te.z) * coef.pi;
        sse += (te.y - pred).squaredNorm();
      } catch (const Error&) {
        ok = false;
      }
    }
    report.criterion.push_back(ok ? sse / static_cast<double>(n)
                                  : std::numeric_limits<double>::infinity());
  }

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < report.k_grid.size(); ++i) {
    const double c = report.criterion[i];
    if (c < best || (c == best && std::isfinite(c) && report.k_grid[i] < report.chosen)) {
      best = c;
      report.chosen = report.k_grid[i];
    }
  }
  if (!std::isfinite(best)) throw SelectionError("no candidate basis order could be fitted");
  return report;
}

std::string to_string(WildWeights w) { return w == WildWeights::rademacher ? "rademacher" : "mammen"; }

WildWeights parse_wild_weights(const std::string& name) {
  if (name == "rademacher") return WildWeights::rademacher;
  if (name == "mammen") return WildWeights::mammen;
  throw ConfigError("unknown wild bootstrap weights '" + name + "'");
}

Eigen::VectorXd draw_wild_weights(WildWeights law, Eigen::Index n, Rng& rng) {
  Eigen::VectorXd w(n);
  if (law == WildWeights::rademacher) {
    for (Eigen::Index i = 0; i < n; ++i) w(i) = uniform_open(rng) < 0.5 ? -1.0 : 1.0;
    return w;
  }
  const double root5 = std::sqrt(5.0);
  const double low = -(root5 - 1.0) / 2.0;
  const double high = (root5 + 1.0) / 2.0;
  const double p_low = (root5 + 1.0) / (2.0 * root5);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = uniform_open(rng) < p_low ? low : high;
  return w;
}

double sample_quantile(std::vector<double>& values, double prob) {
  if (values.empty()) throw EmptyInputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapBands wild_bootstrap_bands(const FitResult& fit, const DesignMatrices& design,
                                    const Eigen::MatrixXd& points, const BootstrapOptions& options) {
  if (options.draws < 99) throw ConfigError("wild bootstrap needs at least 99 draws");
  if (!(options.level > 0.0 && options.level < 1.0)) throw ConfigError("level must be in (0, 1)");
  if (fit.residuals.size() != design.n()) throw ShapeError("fit does not belong to this design");

  BootstrapBands out;
  out.draws = options.draws;
  out.level = options.level;
  out.weights = options.weights;
  out.seed = options.seed;
  out.estimate = evaluate_b(fit, design, points);

  // Every fitted function is linear in pi: precompute its evaluation matrix.
  const Eigen::Index width = fit.pi_hat.size();
  const std::size_t ncomp = out.estimate.components.size() + out.estimate.aggregates.size();
  std::vector<Eigen::MatrixXd> eval(ncomp, Eigen::MatrixXd(points.rows(), width));
  for (Eigen::Index k = 0; k < width; ++k) {
    const auto unit = evaluate_b(Eigen::VectorXd::Unit(width, k), design, points);
    std::size_t c = 0;
    for (const auto& comp : unit.components) eval[c++].col(k) = comp.values;
    for (const auto& comp : unit.aggregates) eval[c++].col(k) = comp.values;
  }

  const ProfileSolver solver(design, options.fit);
  const Eigen::VectorXd fitted = fit.fitted.size() == design.n() ? fit.fitted : design.y - fit.residuals;
  const auto draws = static_cast<std::size_t>(options.draws);
  std::vector<Eigen::VectorXd> pis(draws);
  std::vector<char> ok(draws, 0);
  detail::parallel_for(draws, options.threads, [&](std::size_t b) {
    Rng rng = derive_rng(options.seed, b, 0xb0);
    const Eigen::VectorXd w = draw_wild_weights(options.weights, design.n(), rng);
    const Eigen::VectorXd y_star = fitted + w.cwiseProduct(fit.residuals);
    try {
      auto coef = solver.solve(y_star);
      if (coef.pi.allFinite() && coef.delta.allFinite()) {
        pis[b] = std::move(coef.pi);
        ok[b] = 1;
      }
    } catch (const IdentificationError&) {
    }
  });

  std::vector<std::size_t> kept;
  for (std::size_t b = 0; b < draws; ++b) {
    if (ok[b]) kept.push_back(b);
  }
  out.dropped = static_cast<int>(draws - kept.size());
  if (out.dropped > 0.05 * static_cast<double>(draws)) {
    throw BootstrapInstabilityError(std::to_string(out.dropped) + " of " + std::to_string(draws) +
                                    " bootstrap refits failed");
  }

  const double alpha = 1.0 - options.level;
  std::vector<double> column(kept.size());
  std::size_t c = 0;
  auto fill = [&](FunctionComponent& comp) {
    const Eigen::Index m = points.rows();
    Eigen::MatrixXd values(m, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
      values.col(static_cast<Eigen::Index>(i)) = eval[c] * pis[kept[i]];
    }
    Eigen::VectorXd lower(m), upper(m);
    for (Eigen::Index g = 0; g < m; ++g) {
      for (std::size_t i = 0; i < kept.size(); ++i) column[i] = values(g, static_cast<Eigen::Index>(i));
      lower(g) = sample_quantile(column, alpha / 2.0);
      upper(g) = sample_quantile(column, 1.0 - alpha / 2.0);
    }
    comp.lower = std::move(lower);
    comp.upper = std::move(upper);
    ++c;
  };
  for (auto& comp : out.estimate.components) fill(comp);
  for (auto& comp : out.estimate.aggregates) fill(comp);
  return out;
}

}  // namespace rcsieve
