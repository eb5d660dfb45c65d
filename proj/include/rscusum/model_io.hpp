#pragma once

#include <string>

#include <json.hpp>

#include "rscusum/lfd.hpp"
#include "rscusum/models.hpp"

namespace rscusum {

/// Model <-> JSON. Documents use a "kind" discriminator:
///   {"kind":"gaussian",    "mu":[...], "cov":[[...],...]}
///   {"kind":"quartic_exp", "tau":F, "mu":F, "dim":N}
///   {"kind":"rbm",         "W":[[...],...], "b":[...], "c":[...]}
///   {"kind":"mixture",     "weights":[...], "components":[{...},...]}
/// Matrices are row-major nested arrays.
nlohmann::json model_to_json(const ScoreModel& model);
ScoreModelPtr model_from_json(const nlohmann::json& j);
ScoreModelPtr load_model(const std::string& path);
void save_model(const ScoreModel& model, const std::string& path);

nlohmann::json network_to_json(const BetaNetwork& net);
BetaNetwork network_from_json(const nlohmann::json& j);

nlohmann::json lfd_result_to_json(const LfdResult& result);

/// Stream CSV: header t,x_1,...,x_d then one row per time index, floats at
/// 17 significant digits.
void save_stream_csv(const std::vector<Eigen::VectorXd>& stream,
                     const std::string& path);
std::vector<Eigen::VectorXd> load_stream_csv(const std::string& path);

}  // namespace rscusum
