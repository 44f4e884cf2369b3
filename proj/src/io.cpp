#include "rcsieve/io.hpp"

#include "rcsieve/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rcsieve {

using nlohmann::json;

namespace {

std::vector<std::vector<std::string>> parse_records(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& column) {
  const std::string cell = trim(raw);
  auto fail = [&](const std::string& why) {
    return ParseError("row " + std::to_string(row) + ", column '" + column + "': " + why);
  };
  if (cell.empty()) throw fail("missing value");
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw fail("not a number: '" + cell + "'");
  if (!std::isfinite(v)) throw fail("non-finite value");
  return v;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd json_mat(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw ParseError("ragged matrix in JSON");
    m.row(r) = json_vec(j[r]).transpose();
  }
  return m;
}

}  // namespace

Dataset read_csv(std::istream& in, const ColumnSpec& columns, const std::string& source) {
  if (columns.y.empty() || columns.x.empty()) throw SchemaError("need a y column and at least one x column");
  const auto records = parse_records(in);
  if (records.empty()) throw SchemaError("no header row in " + source);
  std::vector<std::string> header;
  for (const auto& h : records.front()) header.push_back(trim(h));

  auto index_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("column '" + name + "' not found in " + source);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t iy = index_of(columns.y);
  std::vector<std::size_t> ix, iz;
  for (const auto& c : columns.x) ix.push_back(index_of(c));
  for (const auto& c : columns.z) iz.push_back(index_of(c));

  const auto n = static_cast<Eigen::Index>(records.size() - 1);
  if (n == 0) throw EmptyInputError("no data rows in " + source);
  Dataset ds;
  ds.source = source;
  ds.y_label = columns.y;
  ds.data.x_labels = columns.x;
  ds.data.z_labels = columns.z;
  ds.data.y.resize(n);
  ds.data.x.resize(n, static_cast<Eigen::Index>(ix.size()));
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(iz.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& rec = records[static_cast<std::size_t>(r) + 1];
    const auto row = static_cast<std::size_t>(r) + 1;
    if (rec.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(rec.size()));
    }
    ds.data.y(r) = parse_cell(rec[iy], row, columns.y);
    for (std::size_t k = 0; k < ix.size(); ++k) {
      ds.data.x(r, static_cast<Eigen::Index>(k)) = parse_cell(rec[ix[k]], row, columns.x[k]);
    }
    for (std::size_t k = 0; k < iz.size(); ++k) {
      z(r, static_cast<Eigen::Index>(k)) = parse_cell(rec[iz[k]], row, columns.z[k]);
    }
  }
  if (!iz.empty()) ds.data.z = std::move(z);
  return ds;
}

Dataset load_csv(const std::string& path, const ColumnSpec& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return read_csv(in, columns, path);
}

std::string csv_text(const SampleData& data, const std::string& y_label) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << y_label;
  for (const auto& l : data.x_labels) os << ',' << l;
  for (const auto& l : data.z_labels) os << ',' << l;
  os << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    os << data.y(i);
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) os << ',' << data.x(i, j);
    if (data.z) {
      for (Eigen::Index j = 0; j < data.z->cols(); ++j) os << ',' << (*data.z)(i, j);
    }
    os << '\n';
  }
  return os.str();
}

void write_csv(const std::string& path, const SampleData& data, const std::string& y_label) {
  write_text(path, csv_text(data, y_label));
}

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  if (order && *order < 1) throw ConfigError("basis order must be >= 1");
  if (!order && k_grid.empty()) throw ConfigError("empty basis order grid");
  for (int k : k_grid) {
    if (k < 1) throw ConfigError("basis orders must be >= 1");
  }
  if (cv_folds < 0 || cv_folds == 1) throw ConfigError("cv folds must be 0 (leave-one-out) or >= 2");
  if (bootstrap_draws < 99) throw ConfigError("bootstrap needs at least 99 draws");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must be in (0, 1)");
  if (!(ginv_tol > 0.0) || !(ident_tol > 0.0) || !(rank_tol > 0.0)) {
    throw ConfigError("tolerances must be positive");
  }
  if (grid_points < 2) throw ConfigError("grid needs at least 2 points");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

FitOptions RunConfig::fit_options() const {
  FitOptions f;
  f.ginv_tol = ginv_tol;
  f.ident_tol = ident_tol;
  f.dof_correction = dof_correction;
  return f;
}

ModelSpec RunConfig::model_spec() const {
  ModelSpec m;
  m.family = family;
  m.order = order.value_or(k_grid.empty() ? 1 : k_grid.front());
  m.rank_tol = rank_tol;
  return m;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["family"] = to_string(c.family);
  j["order"] = c.order ? json(*c.order) : json(nullptr);
  j["k_grid"] = c.k_grid;
  j["cv_folds"] = c.cv_folds;
  j["bootstrap_draws"] = c.bootstrap_draws;
  j["level"] = c.level;
  j["weights"] = to_string(c.weights);
  j["seed"] = c.seed;
  j["ginv_tol"] = c.ginv_tol;
  j["ident_tol"] = c.ident_tol;
  j["rank_tol"] = c.rank_tol;
  j["dof_correction"] = c.dof_correction;
  j["threads"] = c.threads;
  j["grid_points"] = c.grid_points;
  j["out_dir"] = c.out_dir;
  return j.dump(2);
}

RunConfig config_from_json(const std::string& text, RunConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "family") c.family = parse_basis_family(v.get<std::string>());
      else if (key == "order") c.order = v.is_null() ? std::nullopt : std::optional<int>(v.get<int>());
      else if (key == "k_grid") c.k_grid = v.get<std::vector<int>>();
      else if (key == "cv_folds") c.cv_folds = v.get<int>();
      else if (key == "bootstrap_draws") c.bootstrap_draws = v.get<int>();
      else if (key == "level") c.level = v.get<double>();
      else if (key == "weights") c.weights = parse_wild_weights(v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "ginv_tol") c.ginv_tol = v.get<double>();
      else if (key == "ident_tol") c.ident_tol = v.get<double>();
      else if (key == "rank_tol") c.rank_tol = v.get<double>();
      else if (key == "dof_correction") c.dof_correction = v.get<bool>();
      else if (key == "threads") c.threads = v.get<unsigned>();
      else if (key == "grid_points") c.grid_points = v.get<Eigen::Index>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  return config_from_json(read_text(path), std::move(base));
}

// ---------------------------------------------------------------------------

std::string fit_to_json(const FitResult& fit) {
  json j;
  j["delta_labels"] = fit.delta_labels;
  j["delta_hat"] = vec_json(fit.delta_hat);
  j["standard_errors"] = vec_json(fit.standard_errors());
  j["vcov_delta"] = mat_json(fit.vcov_delta);
  j["pi_hat"] = vec_json(fit.pi_hat);
  j["order"] = fit.order;
  j["rank_s"] = fit.rank_s;
  j["residuals"] = vec_json(fit.residuals);
  j["fitted"] = vec_json(fit.fitted);
  return j.dump(2);
}

FitResult fit_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    FitResult f;
    f.delta_labels = j.at("delta_labels").get<std::vector<std::string>>();
    f.delta_hat = json_vec(j.at("delta_hat"));
    f.vcov_delta = json_mat(j.at("vcov_delta"));
    f.pi_hat = json_vec(j.at("pi_hat"));
    f.order = j.at("order").get<int>();
    f.rank_s = j.at("rank_s").get<Eigen::Index>();
    f.residuals = json_vec(j.at("residuals"));
    f.fitted = json_vec(j.at("fitted"));
    f.sigma2_hat = f.residuals.array().square();
    if (static_cast<Eigen::Index>(f.delta_labels.size()) != f.delta_hat.size()) {
      throw ParseError("delta labels and estimates differ in length");
    }
    return f;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed fit document: ") + e.what());
  }
}

std::string cv_to_json(const CvReport& r) {
  json j;
  j["k_grid"] = r.k_grid;
  json crit = json::array();
  for (double c : r.criterion) crit.push_back(std::isfinite(c) ? json(c) : json(nullptr));
  j["criterion"] = crit;
  j["chosen"] = r.chosen;
  j["folds"] = r.folds;
  j["seed"] = r.seed;
  return j.dump(2);
}

std::string summary_to_json(const RepSummary& s) {
  json j;
  json d;
  d["design"] = to_string(s.design.id);
  d["n"] = s.design.n;
  d["reps"] = s.design.reps;
  d["seed"] = s.design.seed;
  d["bounds"] = {s.design.bounds.lo, s.design.bounds.hi};
  d["rho_x"] = s.design.rho_x;
  d["redraw_x"] = s.design.redraw_x;
  d["grid"] = {s.design.grid_lo, s.design.grid_hi, s.design.grid_points};
  j["design"] = d;
  j["truth"] = {{"labels", s.truth.labels}, {"delta", vec_json(s.truth.delta)}, {"notes", s.truth.notes}};
  json params = json::array();
  for (const auto& p : s.parameters) {
    params.push_back({{"estimator", p.estimator}, {"label", p.label}, {"truth", p.truth},
                      {"mean", p.mean}, {"bias", p.bias}, {"se", p.se}, {"rmse", p.rmse}});
  }
  j["parameters"] = params;
  json mase = json::object();
  for (std::size_t i = 0; i < s.mase.size(); ++i) mase[s.mase_labels[i]] = s.mase[i];
  j["mase"] = mase;
  j["studentized_labels"] = s.studentized_labels;
  j["studentized"] = mat_json(s.studentized);
  j["chosen_orders"] = s.chosen_orders;
  j["failures"] = s.failures;
  json failed = json::array();
  for (const auto& r : s.replications) {
    if (!r.ok) failed.push_back({{"rep", r.rep}, {"error", r.error}});
  }
  j["failed_replications"] = failed;
  return j.dump(2);
}

std::string summary_table(const RepSummary& s) {
  std::ostringstream os;
  os << "design " << to_string(s.design.id) << "  n=" << s.design.n << "  reps=" << s.design.reps
     << "  seed=" << s.design.seed << "  failures=" << s.failures << "\n";
  os << std::left << std::setw(10) << "estimator" << std::setw(10) << "param" << std::right
     << std::setw(12) << "truth" << std::setw(12) << "mean" << std::setw(12) << "bias"
     << std::setw(12) << "se" << std::setw(12) << "rmse" << "\n";
  os << std::fixed << std::setprecision(6);
  for (const auto& p : s.parameters) {
    os << std::left << std::setw(10) << p.estimator << std::setw(10) << p.label << std::right
       << std::setw(12) << p.truth << std::setw(12) << p.mean << std::setw(12) << p.bias
       << std::setw(12) << p.se << std::setw(12) << p.rmse << "\n";
  }
  for (std::size_t i = 0; i < s.mase.size(); ++i) {
    os << "MASE " << s.mase_labels[i] << " " << std::setprecision(6) << s.mase[i] << "\n";
  }
  return os.str();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string manifest_to_json(const Manifest& m) {
  json j;
  j["tool"] = "rcsieve";
  j["version"] = kVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["config_hash"] = m.config_hash;
  j["data_hash"] = m.data_hash;
  j["outputs"] = m.outputs;
  return j.dump(2);
}

void write_grid_csv(std::ostream& out, const Eigen::VectorXd& xi, const FunctionComponent& c) {
  if (xi.size() != c.values.size()) throw ShapeError("grid and function values differ in length");
  out << "xi,b_hat,lower,upper\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    out << xi(i) << ',' << c.values(i) << ',';
    if (c.lower) out << (*c.lower)(i);
    out << ',';
    if (c.upper) out << (*c.upper)(i);
    out << '\n';
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace rcsieve
