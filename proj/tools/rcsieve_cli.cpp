// rcsieve command line: fit, simulate, bands, cv.

#include "rcsieve/errors.hpp"
#include "rcsieve/io.hpp"
#include "rcsieve/montecarlo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace rcsieve;
using nlohmann::json;

namespace {

struct Options {
  // data
  std::string data;
  std::string y = "y";
  std::vector<std::string> x;
  std::vector<std::string> z;
  std::string design;
  Eigen::Index n = 500;
  int reps = 1000;
  double rho_x = 0.0;
  bool fixed_x = false;
  // model / inference
  std::string config;
  std::optional<int> k;
  std::vector<int> k_grid;
  std::optional<int> cv_folds;
  std::optional<std::string> family;
  std::optional<std::uint64_t> seed;
  std::optional<int> draws;
  std::optional<double> level;
  std::optional<std::string> weights;
  std::optional<unsigned> threads;
  std::optional<Eigen::Index> grid_points;
  std::optional<std::string> out;
  bool bands = false;
  bool dof = false;
};

void add_data_options(CLI::App* app, Options& o) {
  app->add_option("--data", o.data, "CSV file with a header row");
  app->add_option("--y", o.y, "response column")->capture_default_str();
  app->add_option("--x", o.x, "regressor columns")->delimiter(',');
  app->add_option("--z", o.z, "control columns")->delimiter(',');
  app->add_option("--design", o.design, "draw data from a simulation design instead of --data")
      ->check(CLI::IsMember({"d1_uni", "d1_biv", "d2_uni", "d2_biv", "d3_iv"}));
  app->add_option("--n", o.n, "sample size of a simulated draw")->capture_default_str();
  app->add_option("--rho-x", o.rho_x, "latent correlation of bivariate designs")->capture_default_str();
}

void add_model_options(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "JSON run configuration");
  app->add_option("--k", o.k, "fixed basis order (skips cross-validation)");
  app->add_option("--k-grid", o.k_grid, "candidate basis orders for cross-validation")->delimiter(',');
  app->add_option("--cv-folds", o.cv_folds, "cross-validation folds (0 = leave-one-out)");
  app->add_option("--family", o.family, "basis family")->check(CLI::IsMember({"polynomial", "bspline"}));
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--threads", o.threads, "worker threads");
  app->add_option("--out", o.out, "output directory");
  app->add_flag("--dof", o.dof, "degrees-of-freedom correction for the sandwich");
}

void add_band_options(CLI::App* app, Options& o) {
  app->add_option("--B", o.draws, "wild bootstrap draws");
  app->add_option("--level", o.level, "band level in (0, 1)");
  app->add_option("--weights", o.weights, "wild bootstrap weights")
      ->check(CLI::IsMember({"rademacher", "mammen"}));
  app->add_option("--grid-points", o.grid_points, "points per evaluation grid");
}

RunConfig resolve_config(const Options& o) {
  RunConfig c;
  if (!o.config.empty()) c = load_run_config(o.config);
  if (o.k) c.order = *o.k;
  if (!o.k_grid.empty()) c.k_grid = o.k_grid;
  if (o.cv_folds) c.cv_folds = *o.cv_folds;
  if (o.family) c.family = parse_basis_family(*o.family);
  if (o.seed) c.seed = *o.seed;
  if (o.draws) c.bootstrap_draws = *o.draws;
  if (o.level) c.level = *o.level;
  if (o.weights) c.weights = parse_wild_weights(*o.weights);
  if (o.threads) c.threads = *o.threads;
  if (o.grid_points) c.grid_points = *o.grid_points;
  if (o.out) c.out_dir = *o.out;
  if (o.dof) c.dof_correction = true;
  c.validate();
  return c;
}

struct Loaded {
  Dataset dataset;
  std::string bytes;  // hashed for the manifest
};

Loaded acquire(const Options& o, const RunConfig& c) {
  if (o.data.empty() == o.design.empty()) throw ConfigError("give exactly one of --data or --design");
  Loaded l;
  if (!o.data.empty()) {
    if (o.x.empty()) throw ConfigError("--x is required with --data");
    l.dataset = load_csv(o.data, {o.y, o.x, o.z});
    l.bytes = read_text(o.data);
    return l;
  }
  SimDesign d;
  d.id = parse_design_id(o.design);
  d.n = o.n;
  d.reps = 1;
  d.seed = c.seed;
  d.rho_x = o.rho_x;
  l.dataset.data = generate(d, 0).data;
  l.dataset.y_label = "y";
  l.dataset.source = "design:" + o.design;
  l.bytes = csv_text(l.dataset.data);
  return l;
}

std::string manifest_hash(const std::string& command, const Options& o, const RunConfig& c) {
  json j = json::parse(config_to_json(c));
  // Neither changes any output value.
  j.erase("out_dir");
  j.erase("threads");
  j["command"] = command;
  j["data"] = o.data.empty() ? json(nullptr) : json(o.data);
  j["design"] = o.design;
  j["n"] = o.n;
  j["rho_x"] = o.rho_x;
  return fnv1a_hex(j.dump());
}

void write_manifest(const std::string& command, const Options& o, const RunConfig& c,
                    const std::string& data_bytes, std::vector<std::string> outputs) {
  Manifest m;
  m.command = command;
  m.seed = c.seed;
  m.config_hash = manifest_hash(command, o, c);
  m.data_hash = fnv1a_hex(data_bytes);
  m.outputs = std::move(outputs);
  write_text((fs::path(c.out_dir) / "manifest.json").string(), manifest_to_json(m) + "\n");
}

std::string slug(const std::string& label) {
  std::string s;
  for (char ch : label) {
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_') s += ch;
    else if (ch == ',' || ch == '[') s += '_';
  }
  return s;
}

int cmd_fit(const Options& o, bool with_bands) {
  const RunConfig c = resolve_config(o);
  const Loaded l = acquire(o, c);
  const SampleData& data = l.dataset.data;
  fs::create_directories(c.out_dir);

  ModelSpec spec = c.model_spec();
  spec.domains = empirical_domains(data.x);
  std::optional<CvReport> cv;
  if (!c.order) {
    CvOptions co;
    co.k_grid = c.k_grid;
    co.folds = c.cv_folds;
    co.seed = c.seed;
    co.fit = c.fit_options();
    cv = cross_validate(data, spec, co);
    spec.order = cv->chosen;
  }
  const DesignMatrices design = build_design(data, spec);
  const FitResult fit = profile_fit(design, c.fit_options());
  const Eigen::VectorXd se = fit.standard_errors();

  std::vector<std::string> outputs;
  json table;
  table["n"] = design.n();
  table["order"] = fit.order;
  table["order_source"] = cv ? "cv" : "fixed";
  table["family"] = to_string(spec.family);
  table["labels"] = fit.delta_labels;
  table["estimate"] = std::vector<double>(fit.delta_hat.data(), fit.delta_hat.data() + fit.delta_hat.size());
  table["se"] = std::vector<double>(se.data(), se.data() + se.size());
  table["pi_norm"] = fit.pi_hat.norm();
  table["sieve_rank"] = fit.rank_s;
  if (cv) table["cv"] = json::parse(cv_to_json(*cv));
  write_text((fs::path(c.out_dir) / "coefficients.json").string(), table.dump(2) + "\n");
  write_text((fs::path(c.out_dir) / "fit.json").string(), fit_to_json(fit) + "\n");
  outputs = {"coefficients.json", "fit.json"};

  std::cout << "n = " << design.n() << ", K = " << fit.order << (cv ? " (cross-validated)" : " (fixed)")
            << ", sieve rank = " << fit.rank_s << "\n";
  std::cout << std::left << std::setw(14) << "parameter" << std::right << std::setw(14) << "estimate"
            << std::setw(14) << "std.err" << "\n"
            << std::fixed << std::setprecision(6);
  for (Eigen::Index i = 0; i < fit.delta_hat.size(); ++i) {
    std::cout << std::left << std::setw(14) << fit.delta_labels[static_cast<std::size_t>(i)]
              << std::right << std::setw(14) << fit.delta_hat(i) << std::setw(14) << se(i) << "\n";
  }
  std::cout << "||pi_hat|| = " << fit.pi_hat.norm() << "\n";

  if (with_bands) {
    BootstrapOptions bo;
    bo.draws = c.bootstrap_draws;
    bo.level = c.level;
    bo.weights = c.weights;
    bo.seed = c.seed;
    bo.threads = c.threads;
    bo.fit = c.fit_options();
    for (Eigen::Index a = 0; a < design.p(); ++a) {
      const Eigen::VectorXd grid = linspace(design.domains[a].lo, design.domains[a].hi, c.grid_points);
      const Eigen::MatrixXd points = curve_points(design, static_cast<int>(a), grid);
      const auto bands = wild_bootstrap_bands(fit, design, points, bo);
      std::vector<const FunctionComponent*> picked;
      for (const auto& comp : bands.estimate.components) {
        if (comp.argument == a) picked.push_back(&comp);
      }
      if (design.p() == 1) {
        for (const auto& comp : bands.estimate.aggregates) picked.push_back(&comp);
      }
      for (const auto* comp : picked) {
        const std::string name = "grid_" + slug(comp->label) + ".csv";
        std::ostringstream os;
        write_grid_csv(os, grid, *comp);
        write_text((fs::path(c.out_dir) / name).string(), os.str());
        outputs.push_back(name);
      }
      std::cout << "bands along " << design.x_labels[static_cast<std::size_t>(a)] << ": " << bands.draws
                << " draws, " << bands.dropped << " dropped\n";
    }
  }
  write_manifest(with_bands ? "bands" : "fit", o, c, l.bytes, outputs);
  std::cout << "wrote " << outputs.size() + 1 << " files to " << c.out_dir << "\n";
  return 0;
}

int cmd_cv(const Options& o) {
  const RunConfig c = resolve_config(o);
  const Loaded l = acquire(o, c);
  ModelSpec spec = c.model_spec();
  spec.domains = empirical_domains(l.dataset.data.x);
  CvOptions co;
  co.k_grid = c.order ? std::vector<int>{*c.order} : c.k_grid;
  co.folds = c.cv_folds;
  co.seed = c.seed;
  co.fit = c.fit_options();
  const CvReport r = cross_validate(l.dataset.data, spec, co);
  std::cout << "K     criterion\n" << std::setprecision(8);
  for (std::size_t i = 0; i < r.k_grid.size(); ++i) {
    std::cout << std::left << std::setw(6) << r.k_grid[i] << r.criterion[i] << "\n";
  }
  std::cout << "chosen K = " << r.chosen << " (" << r.folds << " folds)\n";
  if (o.out) {
    fs::create_directories(c.out_dir);
    write_text((fs::path(c.out_dir) / "cv.json").string(), cv_to_json(r) + "\n");
    write_manifest("cv", o, c, l.bytes, {"cv.json"});
  }
  return 0;
}

int cmd_simulate(const Options& o) {
  if (o.design.empty()) throw ConfigError("simulate needs --design");
  const RunConfig c = resolve_config(o);
  SimDesign d;
  d.id = parse_design_id(o.design);
  d.n = o.n;
  d.reps = o.reps;
  d.seed = c.seed;
  d.rho_x = o.rho_x;
  d.redraw_x = !o.fixed_x;

  StudyOptions so;
  so.estimator.model = c.model_spec();
  so.estimator.fit = c.fit_options();
  so.estimator.cv.k_grid = c.k_grid;
  so.estimator.cv.folds = c.cv_folds;
  so.estimator.cv.seed = c.seed;
  if (c.order) so.estimator.fixed_order = c.order;
  so.comparators = {ComparatorMethod::ols};
  if (d.id == DesignId::d3_iv) so.comparators.push_back(ComparatorMethod::control_function);
  so.threads = c.threads;

  const RepSummary s = run_study(d, so);
  std::cout << summary_table(s);
  if (o.out) {
    fs::create_directories(c.out_dir);
    write_text((fs::path(c.out_dir) / "summary.json").string(), summary_to_json(s) + "\n");
    json dj = {{"design", o.design}, {"n", o.n}, {"reps", o.reps}, {"fixed_x", o.fixed_x}};
    write_manifest("simulate", o, c, dj.dump(), {"summary.json"});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Series estimation of correlated random coefficient models"};
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit", "estimate the model on one dataset");
  add_data_options(fit, o);
  add_model_options(fit, o);
  add_band_options(fit, o);
  fit->add_flag("--bands", o.bands, "also compute wild bootstrap bands");

  auto* bands = app.add_subcommand("bands", "estimate and write wild bootstrap bands");
  add_data_options(bands, o);
  add_model_options(bands, o);
  add_band_options(bands, o);

  auto* cv = app.add_subcommand("cv", "cross-validate the basis order");
  add_data_options(cv, o);
  add_model_options(cv, o);

  auto* sim = app.add_subcommand("simulate", "run a replication study");
  sim->add_option("--design", o.design, "simulation design")
      ->required()
      ->check(CLI::IsMember({"d1_uni", "d1_biv", "d2_uni", "d2_biv", "d3_iv"}));
  sim->add_option("--n", o.n, "sample size")->capture_default_str();
  sim->add_option("--reps", o.reps, "replications")->capture_default_str();
  sim->add_option("--rho-x", o.rho_x, "latent correlation of bivariate designs")->capture_default_str();
  sim->add_flag("--fixed-x", o.fixed_x, "keep the regressors fixed across replications");
  add_model_options(sim, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: UsageError: " << e.what() << "\n";
    return 2;
  }

  try {
    if (fit->parsed()) return cmd_fit(o, o.bands);
    if (bands->parsed()) return cmd_fit(o, true);
    if (cv->parsed()) return cmd_cv(o);
    if (sim->parsed()) return cmd_simulate(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
