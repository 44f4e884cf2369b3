#include "rcsieve/errors.hpp"
#include "rcsieve/io.hpp"
#include "rcsieve/montecarlo.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace pybind11::literals;
using namespace rcsieve;

namespace {

SampleData sample(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::optional<Eigen::MatrixXd>& z) {
  SampleData d;
  d.y = y;
  d.x = x;
  d.x_labels = default_labels("x", x.cols());
  if (z && z->cols() > 0) {
    d.z = *z;
    d.z_labels = default_labels("z", z->cols());
  }
  return d;
}

ModelSpec model(const std::string& family, bool rescale) {
  ModelSpec spec;
  spec.family = parse_basis_family(family);
  spec.rescale = rescale;
  return spec;
}

py::dict cv_dict(const CvReport& r) {
  return py::dict("k_grid"_a = r.k_grid, "criterion"_a = r.criterion, "chosen"_a = r.chosen, "folds"_a = r.folds,
                  "seed"_a = r.seed);
}

py::list components(const FunctionEstimate& est) {
  py::list out;
  auto add = [&](const FunctionComponent& c, bool aggregate) {
    py::dict d("label"_a = c.label, "aggregate"_a = aggregate, "control"_a = c.control, "target"_a = c.target,
               "argument"_a = c.argument, "values"_a = c.values);
    d["lower"] = c.lower ? py::cast(*c.lower) : py::none();
    d["upper"] = c.upper ? py::cast(*c.upper) : py::none();
    out.append(d);
  };
  for (const auto& c : est.components) add(c, false);
  for (const auto& c : est.aggregates) add(c, true);
  return out;
}

struct Fitted {
  DesignMatrices design;
  FitResult fit;
  std::optional<CvReport> cv;
};

Fitted fit_sample(const SampleData& d, std::optional<int> order, const std::vector<int>& k_grid, int cv_folds,
                  std::uint64_t seed, const std::string& family, bool rescale, bool dof) {
  ModelSpec spec = model(family, rescale);
  spec.domains = empirical_domains(d.x);
  FitOptions fo;
  fo.dof_correction = dof;
  Fitted out;
  if (order) {
    spec.order = *order;
  } else {
    CvOptions cv;
    cv.k_grid = k_grid;
    cv.folds = cv_folds;
    cv.seed = seed;
    cv.fit = fo;
    out.cv = cross_validate(d, spec, cv);
    spec.order = out.cv->chosen;
  }
  out.design = build_design(d, spec);
  out.fit = profile_fit(out.design, fo);
  return out;
}

py::dict fit_dict(const Fitted& f) {
  py::dict d("delta"_a = f.fit.delta_hat, "labels"_a = f.fit.delta_labels, "se"_a = f.fit.standard_errors(),
             "vcov"_a = f.fit.vcov_delta, "pi"_a = f.fit.pi_hat, "order"_a = f.fit.order,
             "rank_s"_a = f.fit.rank_s, "fitted"_a = f.fit.fitted, "residuals"_a = f.fit.residuals);
  d["cv"] = f.cv ? py::object(cv_dict(*f.cv)) : py::none();
  return d;
}

const std::vector<int> kDefaultGrid{1, 2, 3, 4, 5, 6};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Series estimation of correlated random coefficient models";
  m.attr("__version__") = kVersion;

  static py::exception<Error> error(m, "RcsieveError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (e.kind() + ": " + e.what()).c_str());
    }
  });

  m.def(
      "fit",
      [](const Eigen::VectorXd& y, const Eigen::MatrixXd& x, std::optional<Eigen::MatrixXd> z,
         std::optional<int> order, std::vector<int> k_grid, int cv_folds, std::uint64_t seed,
         const std::string& family, bool rescale, bool dof) {
        return fit_dict(fit_sample(sample(y, x, z), order, k_grid, cv_folds, seed, family, rescale, dof));
      },
      "y"_a, "x"_a, "z"_a = py::none(), "order"_a = py::none(), "k_grid"_a = kDefaultGrid, "cv_folds"_a = 10,
      "seed"_a = 1, "family"_a = "polynomial", "rescale"_a = true, "dof"_a = false,
      "Profiled least squares fit; the order is cross-validated when not given.");

  m.def(
      "cross_validate",
      [](const Eigen::VectorXd& y, const Eigen::MatrixXd& x, std::optional<Eigen::MatrixXd> z,
         std::vector<int> k_grid, int folds, std::uint64_t seed, const std::string& family) {
        const SampleData d = sample(y, x, z);
        ModelSpec spec = model(family, true);
        CvOptions cv;
        cv.k_grid = k_grid;
        cv.folds = folds;
        cv.seed = seed;
        return cv_dict(cross_validate(d, spec, cv));
      },
      "y"_a, "x"_a, "z"_a = py::none(), "k_grid"_a = kDefaultGrid, "folds"_a = 10, "seed"_a = 1,
      "family"_a = "polynomial");

  m.def(
      "bands",
      [](const Eigen::VectorXd& y, const Eigen::MatrixXd& x, std::optional<Eigen::MatrixXd> z,
         std::optional<int> order, int argument, int grid_points, int draws, double level,
         const std::string& weights, std::uint64_t seed, unsigned threads) {
        const Fitted f = fit_sample(sample(y, x, z), order, kDefaultGrid, 10, seed, "polynomial", true, false);
        if (argument < 0 || argument >= f.design.p()) throw ShapeError("argument out of range");
        const auto& dom = f.design.domains[static_cast<std::size_t>(argument)];
        const Eigen::VectorXd grid = linspace(dom.lo, dom.hi, grid_points);
        BootstrapOptions bo;
        bo.draws = draws;
        bo.level = level;
        bo.weights = parse_wild_weights(weights);
        bo.seed = seed;
        bo.threads = threads;
        BootstrapBands b;
        {
          py::gil_scoped_release release;
          b = wild_bootstrap_bands(f.fit, f.design, curve_points(f.design, argument, grid), bo);
        }
        return py::dict("xi"_a = grid, "order"_a = f.fit.order, "draws"_a = b.draws, "dropped"_a = b.dropped,
                        "level"_a = b.level, "components"_a = components(b.estimate));
      },
      "y"_a, "x"_a, "z"_a = py::none(), "order"_a = py::none(), "argument"_a = 0, "grid_points"_a = 101,
      "draws"_a = 500, "level"_a = 0.95, "weights"_a = "rademacher", "seed"_a = 1, "threads"_a = 1,
      "Pointwise wild bootstrap bands along one regressor, others at their means.");

  m.def(
      "simulate_json",
      [](const std::string& design, Eigen::Index n, int reps, std::uint64_t seed, double rho_x, bool fixed_x,
         std::optional<int> order, unsigned threads) {
        SimDesign d;
        d.id = parse_design_id(design);
        d.n = n;
        d.reps = reps;
        d.seed = seed;
        d.rho_x = rho_x;
        d.redraw_x = !fixed_x;
        StudyOptions so;
        so.estimator.fixed_order = order;
        so.comparators = {ComparatorMethod::ols};
        if (d.id == DesignId::d3_iv) so.comparators.push_back(ComparatorMethod::control_function);
        so.threads = threads;
        py::gil_scoped_release release;
        return summary_to_json(run_study(d, so));
      },
      "design"_a, "n"_a = 500, "reps"_a = 100, "seed"_a = 1, "rho_x"_a = 0.0, "fixed_x"_a = false,
      "order"_a = py::none(), "threads"_a = 1);

  m.def(
      "generate",
      [](const std::string& design, Eigen::Index n, int rep, std::uint64_t seed, double rho_x) {
        SimDesign d;
        d.id = parse_design_id(design);
        d.n = n;
        d.seed = seed;
        d.rho_x = rho_x;
        const SimDataset ds = generate(d, rep);
        py::dict out("y"_a = ds.data.y, "x"_a = ds.data.x);
        out["instrument"] = ds.instrument ? py::cast(*ds.instrument) : py::none();
        return out;
      },
      "design"_a, "n"_a = 500, "rep"_a = 0, "seed"_a = 1, "rho_x"_a = 0.0);

  m.def(
      "sample_truncnorm",
      [](Eigen::Index n, double mean, double sd, double lo, double hi, std::uint64_t seed) {
        return sample_truncnorm(n, mean, sd, Interval{lo, hi}, seed);
      },
      "n"_a, "mean"_a = 0.0, "sd"_a = 1.0, "lo"_a = -1.0, "hi"_a = 1.0, "seed"_a = 1);

  m.def(
      "truncnorm_variance", [](double lo, double hi) { return truncnorm_variance(Interval{lo, hi}); }, "lo"_a = -1.0,
      "hi"_a = 1.0, "Variance of a standard normal truncated to [lo, hi].");
}
