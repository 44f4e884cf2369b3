#pragma once

#include "rcsieve/basis.hpp"
#include "rcsieve/design_matrix.hpp"
#include "rcsieve/estimator.hpp"
#include "rcsieve/montecarlo.hpp"
#include "rcsieve/selection.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rcsieve {

inline constexpr const char* kVersion = "0.1.0";

struct ColumnSpec {
  std::string y;
  std::vector<std::string> x;
  std::vector<std::string> z;
};

struct Dataset {
  SampleData data;
  std::string y_label;
  std::string source;
  Eigen::Index n() const { return data.n(); }
};

/// Reads a header-first CSV (RFC 4180 quoting) and extracts the declared
/// columns. Throws SchemaError naming a missing column and ParseError with
/// the 1-based data row and column name for empty or non-numeric cells.
Dataset load_csv(const std::string& path, const ColumnSpec& columns);
Dataset read_csv(std::istream& in, const ColumnSpec& columns, const std::string& source = "<stream>");

/// y, x and z columns with a header row, doubles at round-trip precision.
std::string csv_text(const SampleData& data, const std::string& y_label = "y");
void write_csv(const std::string& path, const SampleData& data, const std::string& y_label = "y");

struct RunConfig {
  BasisFamily family = BasisFamily::polynomial;
  /// Fixed basis order; cross-validation over `k_grid` when absent.
  std::optional<int> order;
  std::vector<int> k_grid{1, 2, 3, 4, 5, 6};
  int cv_folds = 10;
  int bootstrap_draws = 500;
  double level = 0.95;
  WildWeights weights = WildWeights::rademacher;
  std::uint64_t seed = 1;
  double ginv_tol = 1e-10;
  double ident_tol = 1e-12;
  double rank_tol = 1e-8;
  bool dof_correction = false;
  unsigned threads = 1;
  Eigen::Index grid_points = 101;
  std::string out_dir = "out";

  void validate() const;
  FitOptions fit_options() const;
  ModelSpec model_spec() const;
};

std::string config_to_json(const RunConfig& config);
/// Keys absent from the document keep their defaults; unknown keys are an
/// error. Throws ConfigError.
RunConfig config_from_json(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});

/// Doubles are written in shortest round-trip form, so reloading gives
/// bit-identical coefficients.
std::string fit_to_json(const FitResult& fit);
FitResult fit_from_json(const std::string& text);

std::string cv_to_json(const CvReport& report);
std::string summary_to_json(const RepSummary& summary);
/// Fixed-width text table of a RepSummary for the terminal.
std::string summary_table(const RepSummary& summary);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string data_hash;
  std::vector<std::string> outputs;
};

/// No timestamps, so identical runs give identical manifests.
std::string manifest_to_json(const Manifest& manifest);

/// One CSV per function component with columns xi,b_hat,lower,upper; xi is
/// the component's argument (other regressors at their sample means).
void write_grid_csv(std::ostream& out, const Eigen::VectorXd& xi, const FunctionComponent& component);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace rcsieve
