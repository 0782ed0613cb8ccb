#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

#include "l96/ar.hpp"
#include "l96/chaos.hpp"
#include "l96/dynamics.hpp"
#include "l96/regression.hpp"
#include "l96/sparse_model.hpp"

namespace l96 {

using json = nlohmann::ordered_json;

// 17 significant digits, so values round-trip exactly.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd data;

  int column(const std::string& name) const;  // -1 if absent
};

void write_csv(const std::string& path, const std::vector<std::string>& header, const Eigen::MatrixXd& rows);
CsvTable read_csv(const std::string& path);

// Header t,X1..XK and, when the states carry a fast block, Z1..Z(JK).
void write_trajectory_csv(const std::string& path, const Trajectory& traj, int K);
Trajectory read_trajectory_csv(const std::string& path);

void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);
void ensure_directory(const std::string& path);

// Inverse of MultiIndex::to_string ("1", "X3", "X1^2*X4").
MultiIndex parse_monomial(const std::string& s);

json to_json(const ModelParams& p);
// Fields absent from `j` keep the values in `base`. Unknown keys and wrong
// types raise ConfigError naming the field.
ModelParams params_from_json(const json& j, ModelParams base = {});

json to_json(const ARModel& m);
ARModel ar_model_from_json(const json& j);

json to_json(const WilksModel& m);
WilksModel wilks_from_json(const json& j);

json to_json(const SparseModel& m);
SparseModel sparse_model_from_json(const json& j);

// {"kind": "wilks" | "sparse", ...} as written by the fit commands.
std::shared_ptr<const Parameterization> closure_from_json(const json& j);

json lyapunov_summary(const LyapunovResult& r, double band = 1e-2);

}  // namespace l96
