#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "flowlab/csv.hpp"
#include "flowlab/error.hpp"
#include "flowlab/predict.hpp"

namespace flowlab::predict {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json matrix_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from(const json& j, std::string_view name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error("predict", "BadModelFile", fmt::format("tensor {} has {} values, expected {}", name, data.size(), rows * cols));
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++].get<double>();
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void write_json(const json& doc, const std::filesystem::path& path) {
  csv::write_file(path, doc.dump(2) + "\n");
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("predict", "FileNotFound", path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("predict", "BadModelFile", fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace

void save_model(const LstmModel& model, const TrainConfig& cfg, const std::filesystem::path& path) {
  const auto& a = model.arch;
  json params = json::object();
  model.params.visit([&](std::string_view name, const Eigen::MatrixXd& m) {
    params[std::string(name)] = matrix_json(m);
  });
  const json doc = {
      {"format", "flowlab-model"},
      {"version", kFormatVersion},
      {"kind", "lstm"},
      {"architecture",
       {{"input_dim", a.input_dim},
        {"lookback", a.lookback},
        {"hidden1", a.hidden1},
        {"hidden2", a.hidden2},
        {"heads", a.heads},
        {"key_dim", a.key_dim},
        {"dropout", a.dropout}}},
      {"train_config",
       {{"learning_rate", cfg.learning_rate},
        {"beta1", cfg.beta1},
        {"beta2", cfg.beta2},
        {"epsilon", cfg.epsilon},
        {"patience", cfg.patience},
        {"max_epochs", cfg.max_epochs},
        {"batch_size", cfg.batch_size},
        {"train_fraction", cfg.train_fraction},
        {"validation_fraction", cfg.validation_fraction},
        {"test_fraction", cfg.test_fraction},
        {"seed", cfg.seed}}},
      {"standardization",
       {{"feature_mean", vector_json(model.feature_mean)},
        {"feature_sd", vector_json(model.feature_sd)},
        {"target_mean", model.target_mean},
        {"target_sd", model.target_sd}}},
      {"parameter_count", model.parameter_count()},
      {"parameters", std::move(params)}};
  write_json(doc, path);
}

void save_model(const LinearModel& model, const std::filesystem::path& path) {
  const json doc = {{"format", "flowlab-model"},
                    {"version", kFormatVersion},
                    {"kind", model.kind},
                    {"lambda", model.lambda},
                    {"sweeps", model.sweeps},
                    {"feature_mean", vector_json(model.feature_mean)},
                    {"feature_scale", vector_json(model.feature_scale)},
                    {"coefficients", vector_json(model.coefficients)},
                    {"intercept", model.intercept}};
  write_json(doc, path);
}

std::string model_kind(const std::filesystem::path& path) {
  const auto doc = read_json(path);
  if (doc.value("format", "") != "flowlab-model") {
    throw Error("predict", "BadModelFile", path.string() + " is not a flowlab model");
  }
  return doc.at("kind").get<std::string>();
}

LstmModel load_lstm(const std::filesystem::path& path) {
  const auto doc = read_json(path);
  try {
    if (doc.at("kind") != "lstm") throw Error("predict", "BadModelFile", path.string() + " is not an lstm model");
    const auto& a = doc.at("architecture");
    Architecture arch;
    arch.input_dim = a.at("input_dim");
    arch.lookback = a.at("lookback");
    arch.hidden1 = a.at("hidden1");
    arch.hidden2 = a.at("hidden2");
    arch.heads = a.at("heads");
    arch.key_dim = a.at("key_dim");
    arch.dropout = a.at("dropout");
    LstmModel model = LstmModel::zeros(arch);
    const auto& p = doc.at("parameters");
    model.params.visit([&](std::string_view name, Eigen::MatrixXd& m) {
      auto loaded = matrix_from(p.at(std::string(name)), name);
      if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) {
        throw Error("predict", "BadModelFile", fmt::format("tensor {} has the wrong shape", name));
      }
      m = std::move(loaded);
    });
    const auto& s = doc.at("standardization");
    model.feature_mean = vector_from(s.at("feature_mean"));
    model.feature_sd = vector_from(s.at("feature_sd"));
    model.target_mean = s.at("target_mean");
    model.target_sd = s.at("target_sd");
    return model;
  } catch (const json::exception& e) {
    throw Error("predict", "BadModelFile", fmt::format("{}: {}", path.string(), e.what()));
  }
}

LinearModel load_linear(const std::filesystem::path& path) {
  const auto doc = read_json(path);
  try {
    LinearModel m;
    m.kind = doc.at("kind").get<std::string>();
    if (m.kind != "ridge" && m.kind != "lasso") {
      throw Error("predict", "BadModelFile", path.string() + " is not a linear model");
    }
    m.lambda = doc.at("lambda");
    m.sweeps = doc.at("sweeps");
    m.feature_mean = vector_from(doc.at("feature_mean"));
    m.feature_scale = vector_from(doc.at("feature_scale"));
    m.coefficients = vector_from(doc.at("coefficients"));
    m.intercept = doc.at("intercept");
    return m;
  } catch (const json::exception& e) {
    throw Error("predict", "BadModelFile", fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace flowlab::predict
