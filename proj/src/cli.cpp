#include "esdmix/cli.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "esdmix/asymptotics.hpp"

namespace esdmix {

namespace {

bool parse_double_cell(std::string_view cell, double& out) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t'))
    cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
    cell.remove_suffix(1);
  if (cell.empty()) return false;
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_cells(const std::string& line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.emplace_back(line.data() + start, line.size() - start);
      break;
    }
    cells.emplace_back(line.data() + start, comma - start);
    start = comma + 1;
  }
  return cells;
}

}  // namespace

Eigen::MatrixXd parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");

  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  bool first_data_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;

    const std::vector<std::string_view> cells = split_cells(line);
    std::vector<double> row(cells.size());
    bool numeric = true;
    std::size_t bad_col = 0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (!parse_double_cell(cells[j], row[j])) {
        numeric = false;
        bad_col = j;
        break;
      }
    }
    if (!numeric) {
      if (line_no == 1) continue;  // header row
      throw CsvError("non-numeric cell at row " + std::to_string(line_no) + ", column "
                     + std::to_string(bad_col + 1));
    }
    if (first_data_row) {
      width = row.size();
      first_data_row = false;
    } else if (row.size() != width) {
      throw CsvError("ragged row " + std::to_string(line_no) + ": expected "
                     + std::to_string(width) + " cells, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError("no data rows in '" + path + "'");

  Eigen::MatrixXd data(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) data(i, j) = rows[i][j];
  return data;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

/// Minimal ordered JSON emitter. nlohmann::json is used for parsing, but
/// reports are written by hand so numbers carry 17 significant digits and
/// the byte layout is stable across runs.
class JsonOut {
 public:
  void begin_object() { item_prefix(); os_ << '{'; counts_.push_back(0); }
  void end_object() { os_ << '}'; counts_.pop_back(); }
  void begin_array() { item_prefix(); os_ << '['; counts_.push_back(0); }
  void end_array() { os_ << ']'; counts_.pop_back(); }

  void key(const std::string& k) {
    if (counts_.back() > 0) os_ << ',';
    ++counts_.back();
    os_ << '"' << k << "\":";
    after_key_ = true;
  }

  void value(double v) { item_prefix(); os_ << format_double(v); }
  void value(int v) { item_prefix(); os_ << v; }
  void value(std::uint64_t v) { item_prefix(); os_ << v; }
  void value(bool v) { item_prefix(); os_ << (v ? "true" : "false"); }
  void value(const char* s) { value(std::string(s)); }
  void value(const std::string& s) {
    item_prefix();
    os_ << '"';
    for (char c : s) {
      switch (c) {
        case '"': os_ << "\\\""; break;
        case '\\': os_ << "\\\\"; break;
        case '\n': os_ << "\\n"; break;
        case '\t': os_ << "\\t"; break;
        default: os_ << c;
      }
    }
    os_ << '"';
  }

  std::string str() const { return os_.str() + "\n"; }

 private:
  void item_prefix() {
    if (after_key_) {  // value directly after its key
      after_key_ = false;
      return;
    }
    if (!counts_.empty()) {
      if (counts_.back() > 0) os_ << ',';
      ++counts_.back();
    }
  }

  std::ostringstream os_;
  std::vector<int> counts_;  // items emitted in each open container
  bool after_key_ = false;
};

void write_vector(JsonOut& out, const Eigen::VectorXd& v) {
  out.begin_array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.value(v(i));
  out.end_array();
}

void write_matrix(JsonOut& out, const Eigen::MatrixXd& m) {
  out.begin_array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.begin_array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.value(m(i, j));
    out.end_array();
  }
  out.end_array();
}

void emit_report(const Manifest& manifest, const std::string& text) {
  if (manifest.output_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(manifest.output_path, std::ios::binary);
  if (!out) throw CsvError("cannot write '" + manifest.output_path + "'");
  out << text;
}

std::string model_name(const FitConfig& cfg) {
  return cfg.model == ModelFamily::Gaussian ? "gaussian" : "t";
}

void write_fit_payload(JsonOut& out, const FitConfig& cfg, const FitResult& fr) {
  out.key("K");
  out.value(cfg.K);
  out.key("gamma");
  out.value(cfg.gamma);
  out.key("model");
  out.value(model_name(cfg));
  if (cfg.model == ModelFamily::StudentT) {
    out.key("nu");
    out.value(cfg.nu);
  }
  out.key("loglik");
  out.value(fr.loglik);
  out.key("pi");
  write_vector(out, fr.theta.weights);
  out.key("mu");
  out.begin_array();
  for (const Eigen::VectorXd& mu : fr.theta.means) write_vector(out, mu);
  out.end_array();
  out.key("sigma");
  out.begin_array();
  for (const Scatter& s : fr.theta.scatters) write_matrix(out, s.matrix);
  out.end_array();
  out.key("assignments");
  out.begin_array();
  for (int a : fr.assignments) out.value(a + 1);  // labels are 1-based outside
  out.end_array();
  out.key("n_iter");
  out.value(fr.n_iter);
  out.key("converged");
  out.value(fr.converged);
  out.key("seed");
  out.value(static_cast<std::uint64_t>(cfg.seed));
}

void write_existence(JsonOut& out, const ExistenceCheck& check) {
  out.key("ok");
  out.value(check.ok);
  out.key("n");
  out.value(check.n);
  out.key("p");
  out.value(check.p);
  out.key("K");
  out.value(check.K);
  out.key("min_sample_size");
  out.value(check.min_n);
  out.key("reasons");
  out.begin_array();
  for (const std::string& r : check.reasons) out.value(r);
  out.end_array();
}

ComponentLaw make_law(const std::string& text, int p) {
  const auto bad = [&] {
    return CsvError("unknown law '" + text + "' (expected gauss, ball:<r>, cube:<h>, "
                    "contaminated:<eps>:<inflation>)");
  };
  if (text == "gauss" || text == "gaussian")
    return ComponentLaw::gaussian(Eigen::VectorXd::Zero(p),
                                  Eigen::MatrixXd::Identity(p, p));
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) throw bad();
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  try {
    if (kind == "ball") return ComponentLaw::uniform_ball(p, std::stod(rest));
    if (kind == "cube") return ComponentLaw::uniform_cube(p, std::stod(rest));
    if (kind == "contaminated") {
      const std::size_t colon2 = rest.find(':');
      if (colon2 == std::string::npos) throw bad();
      return ComponentLaw::contaminated_gaussian(Eigen::MatrixXd::Identity(p, p),
                                                 std::stod(rest.substr(0, colon2)),
                                                 std::stod(rest.substr(colon2 + 1)));
    }
  } catch (const std::invalid_argument&) {
    throw bad();
  }
  throw bad();
}

ShiftedMixtureSpec build_spec(const Manifest& m) {
  if (m.xi.empty()) throw CsvError("experiment needs xi (component proportions)");
  if (m.levels.empty()) throw CsvError("experiment needs at least one shift gap");
  Eigen::VectorXd xi(m.xi.size());
  for (std::size_t k = 0; k < m.xi.size(); ++k) xi(k) = m.xi[k];
  std::vector<ComponentLaw> laws(m.xi.size(), make_law(m.law, m.p));
  return ShiftedMixtureSpec::collinear(std::move(laws), std::move(xi), m.levels,
                                       m.epsilon, m.eta);
}

int run_check_existence(const Manifest& manifest) {
  const Eigen::MatrixXd data = parse_csv(manifest.data_path);
  const ExistenceCheck check = check_finite_sample_existence(data, manifest.fit);
  JsonOut out;
  out.begin_object();
  out.key("command");
  out.value(std::string("check-existence"));
  write_existence(out, check);
  out.end_object();
  emit_report(manifest, out.str());
  return check.ok ? 0 : 2;
}

int run_fit(const Manifest& manifest) {
  const Eigen::MatrixXd data = parse_csv(manifest.data_path);
  FitConfig cfg = manifest.fit;
  const FitResult fr = fit(data, cfg);
  JsonOut out;
  out.begin_object();
  out.key("command");
  out.value(std::string("fit"));
  write_fit_payload(out, cfg, fr);
  out.end_object();
  emit_report(manifest, out.str());
  return 0;
}

MixtureParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;

  MixtureParams theta;
  theta.K = j.at("K").get<int>();
  const std::string model = j.at("model").get<std::string>();
  theta.gen = model == "gaussian" ? DensityGenerator::gaussian()
                                  : DensityGenerator::student_t(j.at("nu").get<double>());
  const auto& pi = j.at("pi");
  theta.weights.resize(theta.K);
  for (int k = 0; k < theta.K; ++k) theta.weights(k) = pi.at(k).get<double>();
  const auto& mu = j.at("mu");
  const auto& sigma = j.at("sigma");
  theta.p = static_cast<int>(mu.at(0).size());
  for (int k = 0; k < theta.K; ++k) {
    Eigen::VectorXd m(theta.p);
    for (int d = 0; d < theta.p; ++d) m(d) = mu.at(k).at(d).get<double>();
    theta.means.push_back(std::move(m));
    Eigen::MatrixXd s(theta.p, theta.p);
    for (int a = 0; a < theta.p; ++a)
      for (int b = 0; b < theta.p; ++b) s(a, b) = sigma.at(k).at(a).at(b).get<double>();
    theta.scatters.push_back(make_scatter(s));
  }
  theta.validate();
  return theta;
}

int run_classify(const Manifest& manifest) {
  const Eigen::MatrixXd data = parse_csv(manifest.data_path);
  const MixtureParams theta = load_params(manifest.params_path);
  JsonOut out;
  out.begin_object();
  out.key("command");
  out.value(std::string("classify"));
  out.key("assignments");
  out.begin_array();
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    out.value(map_classify(data.row(i).transpose(), theta) + 1);
  out.end_array();
  out.end_object();
  emit_report(manifest, out.str());
  return 0;
}

int run_consistency(const Manifest& manifest) {
  const ShiftedMixtureSpec spec = build_spec(manifest);
  const ConsistencyResult res = run_consistency_experiment(
      spec, manifest.level, manifest.sizes, manifest.fit, manifest.reference_M,
      manifest.fit.seed);
  JsonOut out;
  out.begin_object();
  out.key("command");
  out.value(std::string("consistency-exp"));
  out.key("level");
  out.value(manifest.level);
  out.key("reference_M");
  out.value(manifest.reference_M);
  out.key("reference_loglik_mc");
  out.value(res.reference_loglik_mc);
  out.key("reference_loglik_mc_se");
  out.value(res.reference_loglik_mc_se);
  out.key("seed");
  out.value(static_cast<std::uint64_t>(manifest.fit.seed));
  out.key("rows");
  out.begin_array();
  for (const ConsistencyRow& row : res.rows) {
    out.begin_object();
    out.key("n");
    out.value(row.n);
    if (row.error.empty()) {
      out.key("param_distance");
      out.value(row.param_distance);
      out.key("loglik_gap");
      out.value(row.loglik_gap);
    } else {
      out.key("error");
      out.value(row.error);
    }
    out.end_object();
  }
  out.end_array();
  out.end_object();
  emit_report(manifest, out.str());
  return 0;
}

int run_separation(const Manifest& manifest) {
  const ShiftedMixtureSpec spec = build_spec(manifest);
  std::vector<int> levels(spec.n_levels());
  for (int i = 0; i < spec.n_levels(); ++i) levels[i] = i;
  const SeparationResult res = run_separation_experiment(
      spec, levels, manifest.fit, manifest.n, manifest.fit.seed, manifest.n_test);
  JsonOut out;
  out.begin_object();
  out.key("command");
  out.value(std::string("separation-exp"));
  out.key("assumption_check");
  out.value(res.assumption_check);
  out.key("seed");
  out.value(static_cast<std::uint64_t>(manifest.fit.seed));
  out.key("rows");
  out.begin_array();
  for (const SeparationRow& row : res.rows) {
    out.begin_object();
    out.key("level");
    out.value(row.level);
    out.key("gap");
    out.value(manifest.levels[row.level]);
    if (row.error.empty()) {
      out.key("containment");
      out.begin_array();
      for (double f : row.containment.fractions) out.value(f);
      out.end_array();
      out.key("matching_degenerate");
      out.value(row.containment.degenerate);
      out.key("pi_err");
      out.begin_array();
      for (double v : row.pi_err) out.value(v);
      out.end_array();
      out.key("mu_err");
      out.begin_array();
      for (double v : row.mu_err) out.value(v);
      out.end_array();
      out.key("sigma_err");
      out.begin_array();
      for (double v : row.sigma_err) out.value(v);
      out.end_array();
    } else {
      out.key("error");
      out.value(row.error);
    }
    out.end_object();
  }
  out.end_array();
  out.end_object();
  emit_report(manifest, out.str());
  return 0;
}

}  // namespace

Manifest parse_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CsvError(std::string("manifest parse error: ") + e.what());
  }

  static const std::vector<std::string> known = {
      "command",   "data_path", "output_path", "params_path", "K",
      "gamma",     "model",     "nu",          "n_starts",    "max_iter",
      "rel_tol",   "seed",      "min_weight",  "law",         "p",
      "xi",        "levels",    "level",       "epsilon",     "eta",
      "sizes",     "reference_M", "n",         "n_test"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw CsvError("unknown manifest key '" + item.key() + "'");
  }

  Manifest m;
  const std::string cmd = j.at("command").get<std::string>();
  if (cmd == "check-existence") m.command = Command::CheckExistence;
  else if (cmd == "fit") m.command = Command::Fit;
  else if (cmd == "classify") m.command = Command::Classify;
  else if (cmd == "consistency-exp") m.command = Command::ConsistencyExp;
  else if (cmd == "separation-exp") m.command = Command::SeparationExp;
  else throw CsvError("unknown command '" + cmd + "'");

  const auto get = [&](const char* key, auto& target) {
    using T = std::decay_t<decltype(target)>;
    if (j.contains(key)) target = j.at(key).get<T>();
  };
  get("data_path", m.data_path);
  get("output_path", m.output_path);
  get("params_path", m.params_path);
  get("K", m.fit.K);
  get("gamma", m.fit.gamma);
  if (j.contains("model")) {
    const std::string model = j.at("model").get<std::string>();
    if (model == "gaussian") m.fit.model = ModelFamily::Gaussian;
    else if (model == "t") m.fit.model = ModelFamily::StudentT;
    else throw CsvError("unknown model '" + model + "'");
  }
  get("nu", m.fit.nu);
  get("n_starts", m.fit.n_starts);
  get("max_iter", m.fit.max_iter);
  get("rel_tol", m.fit.rel_tol);
  get("seed", m.fit.seed);
  get("min_weight", m.fit.min_weight);
  get("law", m.law);
  get("p", m.p);
  get("xi", m.xi);
  get("levels", m.levels);
  get("level", m.level);
  get("epsilon", m.epsilon);
  get("eta", m.eta);
  get("sizes", m.sizes);
  get("reference_M", m.reference_M);
  get("n", m.n);
  get("n_test", m.n_test);
  return m;
}

int run_manifest(const Manifest& manifest) {
  try {
    switch (manifest.command) {
      case Command::CheckExistence: return run_check_existence(manifest);
      case Command::Fit: return run_fit(manifest);
      case Command::Classify: return run_classify(manifest);
      case Command::ConsistencyExp: return run_consistency(manifest);
      case Command::SeparationExp: return run_separation(manifest);
    }
    return 1;
  } catch (const ExistenceError& e) {
    std::cerr << "precondition: " << e.what() << "\n";
    return 2;
  } catch (const CsvError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace esdmix
