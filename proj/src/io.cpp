#include "l96/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "l96/errors.hpp"

namespace l96 {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T get_field(const json& j, const char* key, const char* where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + ": missing or invalid field '" + key + "'");
  }
}

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header, const Eigen::MatrixXd& rows) {
  require(header.empty() || static_cast<Eigen::Index>(header.size()) == rows.cols(),
          "write_csv: header length must match column count");
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  if (!header.empty()) out << '\n';
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out << (c ? "," : "") << format_double(rows(r, c));
    out << '\n';
  }
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  t.header = split(line, ',');
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != t.header.size())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields");
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number: " + c);
      }
    }
    rows.push_back(std::move(row));
  }
  t.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.data(r, c) = rows[r][c];
  return t;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, int K) {
  require(traj.states.cols() >= K, "write_trajectory_csv: fewer columns than K");
  std::vector<std::string> header{"t"};
  for (int k = 0; k < K; ++k) header.push_back("X" + std::to_string(k + 1));
  for (Eigen::Index z = K; z < traj.states.cols(); ++z) header.push_back("Z" + std::to_string(z - K + 1));
  Eigen::MatrixXd rows(traj.size(), traj.states.cols() + 1);
  for (Eigen::Index i = 0; i < traj.size(); ++i) rows(i, 0) = traj.times[i];
  rows.rightCols(traj.states.cols()) = traj.states;
  write_csv(path, header, rows);
}

Trajectory read_trajectory_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.empty() || t.header[0] != "t") throw ConfigError(path + ": first column must be 't'");
  Trajectory traj;
  traj.times.assign(t.data.col(0).data(), t.data.col(0).data() + t.data.rows());
  traj.states = t.data.rightCols(t.data.cols() - 1);
  return traj;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void ensure_directory(const std::string& path) { std::filesystem::create_directories(path); }

MultiIndex parse_monomial(const std::string& s) {
  if (s == "1") return {};
  std::vector<std::pair<int, int>> factors;
  for (const auto& part : split(s, '*')) {
    if (part.size() < 2 || part[0] != 'X') throw ConfigError("bad monomial '" + s + "'");
    const auto caret = part.find('^');
    try {
      const int comp = std::stoi(part.substr(1, caret == std::string::npos ? std::string::npos : caret - 1)) - 1;
      const int pow = caret == std::string::npos ? 1 : std::stoi(part.substr(caret + 1));
      if (comp < 0 || pow < 1) throw ConfigError("bad monomial '" + s + "'");
      factors.emplace_back(comp, pow);
    } catch (const std::logic_error&) {
      throw ConfigError("bad monomial '" + s + "'");
    }
  }
  return MultiIndex(std::move(factors));
}

json to_json(const ModelParams& p) {
  return json{{"K", p.K}, {"J", p.J}, {"F", p.F}, {"h", p.h}, {"c", p.c}, {"b", p.b}, {"dt", p.dt}};
}

ModelParams params_from_json(const json& j, ModelParams p) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string where = "model." + key;
    try {
      if (key == "K") p.K = value.get<int>();
      else if (key == "J") p.J = value.get<int>();
      else if (key == "F") p.F = value.get<double>();
      else if (key == "h") p.h = value.get<double>();
      else if (key == "c") p.c = value.get<double>();
      else if (key == "b") p.b = value.get<double>();
      else if (key == "dt") p.dt = value.get<double>();
      else throw ConfigError(where + ": unknown field");
    } catch (const json::exception&) {
      throw ConfigError(where + ": wrong type");
    }
  }
  p.validate();
  return p;
}

json to_json(const ARModel& m) {
  return json{{"phi", m.phi}, {"sigma", m.sigma}, {"sigma_e", m.stationary ? json(m.sigma_e) : json(nullptr)},
              {"stationary", m.stationary}};
}

ARModel ar_model_from_json(const json& j) {
  return make_ar_model(get_field<double>(j, "phi", "ar"), get_field<double>(j, "sigma", "ar"));
}

json to_json(const WilksModel& m) {
  return json{{"kind", "wilks"},
              {"coefficients", std::vector<double>(m.a.begin(), m.a.end())},
              {"train_window", {m.train_t0, m.train_t1}},
              {"condition", m.condition}};
}

WilksModel wilks_from_json(const json& j) {
  const auto a = get_field<std::vector<double>>(j, "coefficients", "wilks");
  if (a.size() != 5) throw ConfigError("wilks.coefficients: expected 5 values (a0..a4)");
  WilksModel m;
  std::copy(a.begin(), a.end(), m.a.begin());
  if (j.contains("train_window")) {
    const auto w = get_field<std::vector<double>>(j, "train_window", "wilks");
    if (w.size() == 2) m.train_t0 = w[0], m.train_t1 = w[1];
  }
  if (j.contains("condition")) m.condition = get_field<double>(j, "condition", "wilks");
  return m;
}

json to_json(const SparseModel& m) {
  json comps = json::array();
  for (int k = 0; k < m.K; ++k) {
    json terms = json::object();
    for (const auto& t : m.terms[k]) terms[t.monomial.to_string()] = t.coefficient;
    json c{{"component", k + 1}, {"bias", m.bias[k]}, {"terms", terms}};
    if (static_cast<int>(m.lambda.size()) == m.K) c["lambda"] = m.lambda[k];
    comps.push_back(c);
  }
  return json{{"kind", "sparse"},
              {"K", m.K},
              {"bias_mode", to_string(m.bias_mode)},
              {"sigma_bias", m.sigma_bias},
              {"seed", m.seed},
              {"train_window", {m.train_t0, m.train_t1}},
              {"components", comps}};
}

SparseModel sparse_model_from_json(const json& j) {
  SparseModel m;
  m.K = get_field<int>(j, "K", "sparse");
  if (m.K < 1) throw ConfigError("sparse.K: must be positive");
  m.bias_mode = bias_mode_from_string(get_field<std::string>(j, "bias_mode", "sparse"));
  if (j.contains("sigma_bias")) m.sigma_bias = get_field<double>(j, "sigma_bias", "sparse");
  if (j.contains("seed")) m.seed = get_field<std::uint64_t>(j, "seed", "sparse");
  if (j.contains("train_window")) {
    const auto w = get_field<std::vector<double>>(j, "train_window", "sparse");
    if (w.size() == 2) m.train_t0 = w[0], m.train_t1 = w[1];
  }
  const json& comps = j.at("components");
  if (!comps.is_array() || static_cast<int>(comps.size()) != m.K)
    throw ConfigError("sparse.components: expected K entries");
  m.terms.resize(m.K);
  m.bias.assign(m.K, 0.0);
  for (int k = 0; k < m.K; ++k) {
    const json& c = comps[k];
    m.bias[k] = get_field<double>(c, "bias", "sparse.components");
    if (c.contains("lambda")) m.lambda.push_back(get_field<double>(c, "lambda", "sparse.components"));
    for (const auto& [name, coef] : c.at("terms").items())
      m.terms[k].push_back({parse_monomial(name), coef.get<double>()});
  }
  if (static_cast<int>(m.lambda.size()) != m.K) m.lambda.clear();
  m.validate();
  return m;
}

std::shared_ptr<const Parameterization> closure_from_json(const json& j) {
  const auto kind = get_field<std::string>(j, "kind", "model");
  if (kind == "wilks") return wilks_from_json(j).closure();
  if (kind == "sparse") return std::make_shared<SparseModel>(sparse_model_from_json(j));
  throw ConfigError("model.kind: expected 'wilks' or 'sparse', got '" + kind + "'");
}

json lyapunov_summary(const LyapunovResult& r, double band) {
  const KaplanYorke ky = kaplan_yorke(r.exponents);
  const SpectrumClasses cls = classify_spectrum(r.exponents, band);
  const double l1 = r.exponents.size() ? r.exponents[0] : 0.0;
  return json{{"exponents", std::vector<double>(r.exponents.data(), r.exponents.data() + r.exponents.size())},
              {"lambda1", l1},
              {"d_ky", ky.dimension},
              {"h_ks", ks_entropy(r.exponents)},
              {"doubling_time", l1 > 0 ? json(error_doubling_time(l1)) : json(nullptr)},
              {"n_positive", cls.positive},
              {"n_neutral", cls.neutral},
              {"n_negative", cls.negative},
              {"neutral_band", band}};
}

}  // namespace l96
