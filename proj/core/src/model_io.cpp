#include "walker/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "walker/csv.hpp"

namespace walker {

using nlohmann::json;

namespace {

std::string encode_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double decode_double(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw DataError("model file: bad numeric string '" + s + "'");
  }
  return v;
}

json encode_vector(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(encode_double(x));
  return out;
}

std::vector<double> decode_vector(const json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& s : j) out.push_back(decode_double(s.get<std::string>()));
  return out;
}

json read_model_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  int version = j.value("format_version", -1);
  if (version != kModelFormatVersion) {
    throw DataError(path.string() + ": unsupported format_version " +
                    std::to_string(version));
  }
  return j;
}

HmmModel hmm_from_json(const json& j) {
  HmmModel model;
  model.m = j.at("m").get<int>();
  model.n = j.at("n").get<int>();
  model.D = j.at("D").get<int>();
  j.at("state_names").get_to(model.state_names);
  model.pi = decode_vector(j.at("pi"));
  for (const auto& row : j.at("theta")) model.theta.push_back(decode_vector(row));
  for (const auto& state : j.at("phi")) {
    model.phi.emplace_back();
    for (const auto& sensor : state) {
      model.phi.back().push_back(decode_vector(sensor));
    }
  }
  if (j.contains("discretizer_edges")) {
    for (const auto& row : j.at("discretizer_edges")) {
      model.discretizer_edges.push_back(decode_vector(row));
    }
  }
  model.validate();
  return model;
}

CrfModel crf_from_json(const json& j) {
  CrfModel model;
  std::vector<Behaviour> members;
  for (const auto& name : j.at("labels")) {
    members.push_back(behaviour_from_string(name.get<std::string>()));
  }
  model.label_set = LabelSet(std::move(members));
  int n = j.at("n").get<int>();
  model.bank = ThresholdBank(model.label_set.size(), n);
  std::vector<bool> relevance;
  j.at("relevance").get_to(relevance);
  model.bank.set_raw(decode_vector(j.at("thresholds")), std::move(relevance));
  model.weights = decode_vector(j.at("weights"));
  model.sigma2 = decode_double(j.at("sigma2").get<std::string>());
  model.validate();
  return model;
}

}  // namespace

void save_model(const HmmModel& model, const std::filesystem::path& path) {
  model.validate();
  json theta = json::array();
  for (const auto& row : model.theta) theta.push_back(encode_vector(row));
  json phi = json::array();
  for (const auto& state : model.phi) {
    json sensors = json::array();
    for (const auto& sensor : state) sensors.push_back(encode_vector(sensor));
    phi.push_back(std::move(sensors));
  }
  json j{{"format_version", kModelFormatVersion},
         {"type", "hmm"},
         {"m", model.m},
         {"n", model.n},
         {"D", model.D},
         {"state_names", model.state_names},
         {"pi", encode_vector(model.pi)},
         {"theta", std::move(theta)},
         {"phi", std::move(phi)}};
  if (!model.discretizer_edges.empty()) {
    json edges = json::array();
    for (const auto& row : model.discretizer_edges) {
      edges.push_back(encode_vector(row));
    }
    j["discretizer_edges"] = std::move(edges);
  }
  atomic_write(path, j.dump(2) + "\n");
}

void save_model(const CrfModel& model, const std::filesystem::path& path) {
  model.validate();
  json j{{"format_version", kModelFormatVersion},
         {"type", "crf"},
         {"labels", model.label_set.names()},
         {"n", model.bank.features()},
         {"sigma2", encode_double(model.sigma2)},
         {"thresholds", encode_vector(model.bank.raw_thresholds())},
         {"relevance", model.bank.raw_relevance()},
         {"weights", encode_vector(model.weights)}};
  atomic_write(path, j.dump(2) + "\n");
}

HmmModel load_hmm_model(const std::filesystem::path& path) {
  json j = read_model_json(path);
  if (j.value("type", "") != "hmm") {
    throw DataError(path.string() + ": not an HMM model file");
  }
  try {
    return hmm_from_json(j);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad model file: " + e.what());
  }
}

CrfModel load_crf_model(const std::filesystem::path& path) {
  json j = read_model_json(path);
  if (j.value("type", "") != "crf") {
    throw DataError(path.string() + ": not a CRF model file");
  }
  try {
    return crf_from_json(j);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad model file: " + e.what());
  }
}

AnyModel load_model(const std::filesystem::path& path) {
  json j = read_model_json(path);
  std::string type = j.value("type", "");
  try {
    if (type == "hmm") return hmm_from_json(j);
    if (type == "crf") return crf_from_json(j);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad model file: " + e.what());
  }
  throw DataError(path.string() + ": unknown model type '" + type + "'");
}

}  // namespace walker
