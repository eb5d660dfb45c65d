#include "rscusum/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace rscusum {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw input_error(std::string(what) + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw input_error(std::string(what) + ": expected numeric entries");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw input_error(std::string(what) + ": expected a nested array");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != cols)
      throw input_error(std::string(what) + ": ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

json model_to_json(const ScoreModel& model) {
  json j;
  j["kind"] = model.kind();
  if (const auto* g = dynamic_cast<const GaussianModel*>(&model)) {
    j["mu"] = vector_to_json(g->mu());
    j["cov"] = matrix_to_json(g->cov());
  } else if (const auto* q = dynamic_cast<const QuarticExpModel*>(&model)) {
    j["tau"] = q->tau();
    j["mu"] = q->mu();
    j["dim"] = q->dim();
  } else if (const auto* r = dynamic_cast<const GaussBernoulliRbm*>(&model)) {
    j["W"] = matrix_to_json(r->W());
    j["b"] = vector_to_json(r->b());
    j["c"] = vector_to_json(r->c());
  } else if (const auto* mix = dynamic_cast<const MixtureModel*>(&model)) {
    j["weights"] = vector_to_json(mix->weights());
    json comps = json::array();
    for (const auto& c : mix->basis()) comps.push_back(model_to_json(*c));
    j["components"] = std::move(comps);
  } else {
    throw input_error("model_to_json: unsupported model kind " + model.kind());
  }
  return j;
}

ScoreModelPtr model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw input_error("model JSON: missing \"kind\" discriminator");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    return std::make_shared<GaussianModel>(vector_from_json(j.at("mu"), "mu"),
                                           matrix_from_json(j.at("cov"), "cov"));
  }
  if (kind == "quartic_exp") {
    return std::make_shared<QuarticExpModel>(
        j.at("tau").get<double>(), j.at("mu").get<double>(),
        static_cast<Eigen::Index>(j.at("dim").get<long>()));
  }
  if (kind == "rbm") {
    return std::make_shared<GaussBernoulliRbm>(matrix_from_json(j.at("W"), "W"),
                                               vector_from_json(j.at("b"), "b"),
                                               vector_from_json(j.at("c"), "c"));
  }
  if (kind == "mixture") {
    std::vector<ScoreModelPtr> comps;
    for (const auto& c : j.at("components")) comps.push_back(model_from_json(c));
    return std::make_shared<MixtureModel>(std::move(comps),
                                          vector_from_json(j.at("weights"), "weights"));
  }
  throw input_error("model JSON: unknown kind \"" + kind + "\"");
}

ScoreModelPtr load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw input_error("model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

void save_model(const ScoreModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw io_error("write failed: " + path);
}

json network_to_json(const BetaNetwork& net) {
  json j;
  json widths = json::array();
  for (Eigen::Index w : net.widths()) widths.push_back(w);
  j["widths"] = std::move(widths);
  json layers = json::array();
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    json layer;
    layer["W"] = matrix_to_json(net.weights()[l]);
    layer["b"] = vector_to_json(net.biases()[l]);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  return j;
}

BetaNetwork network_from_json(const json& j) {
  const auto& widths = j.at("widths");
  if (!widths.is_array() || widths.size() < 2)
    throw input_error("network JSON: widths must list input..output sizes");
  std::vector<int> hidden;
  for (std::size_t i = 1; i + 1 < widths.size(); ++i)
    hidden.push_back(widths[i].get<int>());
  BetaNetwork net(widths.front().get<long>(), widths.back().get<int>(),
                  /*seed=*/0, hidden);
  const auto& layers = j.at("layers");
  if (layers.size() != net.weights().size())
    throw input_error("network JSON: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l)
    net.set_layer(l, matrix_from_json(layers[l].at("W"), "W"),
                  vector_from_json(layers[l].at("b"), "b"));
  return net;
}

json lfd_result_to_json(const LfdResult& result) {
  json j;
  j["mode"] = result.mode;
  j["selected_index"] = result.selected_index;
  j["weights"] = vector_to_json(result.weights);
  j["beta_averages"] = vector_to_json(result.beta_averages);
  j["divergence_to_pre"] = {{"value", result.divergence_to_pre.value},
                            {"std_error", result.divergence_to_pre.std_error},
                            {"n_samples", result.divergence_to_pre.n_samples}};
  if (!result.per_vertex_divergence.empty()) {
    json per = json::array();
    for (const auto& d : result.per_vertex_divergence)
      per.push_back({{"value", d.value},
                     {"std_error", d.std_error},
                     {"n_samples", d.n_samples}});
    j["per_vertex_divergence"] = std::move(per);
  }
  if (std::isfinite(result.final_loss)) j["final_loss"] = result.final_loss;
  j["flags"] = {{"ambiguous", result.ambiguous},
                {"stalled", result.stalled},
                {"class_warning", result.class_warning}};
  if (result.lfd_model) j["lfd_model"] = model_to_json(*result.lfd_model);
  if (result.network) j["network"] = network_to_json(*result.network);
  return j;
}

void save_stream_csv(const std::vector<Eigen::VectorXd>& stream,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  const Eigen::Index d = stream.empty() ? 0 : stream.front().size();
  out << 't';
  for (Eigen::Index i = 1; i <= d; ++i) out << ",x_" << i;
  out << '\n';
  char buf[64];
  for (std::size_t t = 0; t < stream.size(); ++t) {
    out << (t + 1);
    for (Eigen::Index i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", stream[t][i]);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw io_error("write failed: " + path);
}

std::vector<Eigen::VectorXd> load_stream_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open stream file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw input_error("stream CSV is empty: " + path);

  std::vector<Eigen::VectorXd> stream;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // t column
    std::vector<double> vals;
    while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
    Eigen::VectorXd x(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i)
      x[static_cast<Eigen::Index>(i)] = vals[i];
    if (!stream.empty() && stream.front().size() != x.size())
      throw input_error("stream CSV has inconsistent row widths: " + path);
    stream.push_back(std::move(x));
  }
  return stream;
}

}  // namespace rscusum
