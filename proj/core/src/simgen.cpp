#include "walker/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "walker/csv.hpp"

namespace walker {

using nlohmann::json;

HmmSample sample_hmm(const HmmModel& model, int length, std::uint64_t seed) {
  model.validate();
  if (length < 1) throw DataError("sample_hmm: length must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](std::span<const double> dist) {
    double u = unit(rng);
    double acc = 0;
    for (size_t i = 0; i + 1 < dist.size(); ++i) {
      acc += dist[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(dist.size()) - 1;
  };

  HmmSample sample;
  sample.states.resize(length);
  sample.observations.participant_id = "hmm-sample";
  for (int k = 0; k < model.n; ++k) {
    sample.observations.feature_names.push_back("s" + std::to_string(k));
  }
  sample.observations.values.assign(length, std::vector<double>(model.n));
  sample.observations.discretized.assign(length, std::vector<int>(model.n));

  for (int t = 0; t < length; ++t) {
    int b = t == 0 ? draw(model.pi) : draw(model.theta[sample.states[t - 1]]);
    sample.states[t] = b;
    for (int k = 0; k < model.n; ++k) {
      int s = draw(model.phi[b][k]) + 1;  // bins are 1-based
      sample.observations.discretized[t][k] = s;
      sample.observations.values[t][k] = s;
    }
  }
  return sample;
}

const BehaviourEmission& EmissionTable::row(Behaviour b) const {
  auto it = rows.find(b);
  if (it == rows.end()) {
    throw DataError("emission table has no row for " + to_string(b));
  }
  return it->second;
}

EmissionTable EmissionTable::canonical() {
  EmissionTable table;
  auto& r = table.rows;

  BehaviourEmission ntw;  // no load, not moving, quiet channels
  ntw.load_mean = {100, 100, 100, 100};
  ntw.noise_sigma = {60, 60, 60, 40, 40, 40, 40, 0};
  r[Behaviour::NTW] = ntw;

  BehaviourEmission st;  // hands on, load fluctuations, no motion
  st.load_mean = {5000, 5000, 5000, 5000};
  st.noise_sigma = {150, 150, 150, 700, 700, 700, 700, 0};
  r[Behaviour::ST] = st;

  BehaviourEmission wf;  // steady forward displacement
  wf.load_mean = {6000, 6000, 6000, 6000};
  wf.encoder_rate = 25;
  r[Behaviour::WF] = wf;

  BehaviourEmission wb = wf;  // encoder decreases
  wb.encoder_rate = -20;
  r[Behaviour::WB] = wb;

  BehaviourEmission tl;  // slower, heavier on the left, mild lateral accel
  tl.load_mean = {9000, 4000, 9000, 4000};
  tl.accel_mean = {32768, 33200, 32768};
  tl.encoder_rate = 10;
  r[Behaviour::TL] = tl;

  BehaviourEmission tr;
  tr.load_mean = {4000, 9000, 4000, 9000};
  tr.accel_mean = {32768, 32336, 32768};
  tr.encoder_rate = 10;
  r[Behaviour::TR] = tr;

  BehaviourEmission trs;  // wide load swings during sit<->stand
  trs.load_mean = {8000, 8000, 8000, 8000};
  trs.noise_sigma = {400, 400, 900, 2500, 2500, 2500, 2500, 0};
  r[Behaviour::TRS] = trs;

  BehaviourEmission gur;  // forward gravity component while climbing
  gur.load_mean = {5000, 5000, 7500, 7500};
  gur.accel_mean = {34300, 32768, 32768};
  gur.encoder_rate = 15;
  r[Behaviour::GUR] = gur;

  BehaviourEmission gdr;
  gdr.load_mean = {7500, 7500, 5000, 5000};
  gdr.accel_mean = {31236, 32768, 32768};
  gdr.encoder_rate = 15;
  r[Behaviour::GDR] = gdr;

  BehaviourEmission sw;  // sitting: much higher load than anything else
  sw.load_mean = {25000, 25000, 25000, 25000};
  sw.noise_sigma = {100, 100, 100, 600, 600, 600, 600, 0};
  r[Behaviour::SW] = sw;

  BehaviourEmission rt;  // one hand reaching, weight shifted to one side
  rt.load_mean = {9000, 1500, 9000, 1500};
  rt.noise_sigma = {200, 200, 200, 1200, 1200, 1200, 1200, 0};
  r[Behaviour::RT] = rt;

  BehaviourEmission guc;  // vertical jolt at the curb
  guc.load_mean = {6500, 6500, 6500, 6500};
  guc.accel_mean = {32768, 32768, 34500};
  guc.noise_sigma = {200, 200, 1800, 500, 500, 500, 500, 0};
  guc.encoder_rate = 5;
  r[Behaviour::GUC] = guc;

  BehaviourEmission gdc;
  gdc.load_mean = {6500, 6500, 6500, 6500};
  gdc.accel_mean = {32768, 32768, 31036};
  gdc.noise_sigma = {200, 200, 1800, 500, 500, 500, 500, 0};
  gdc.encoder_rate = 5;
  r[Behaviour::GDC] = gdc;

  return table;
}

namespace {

json emission_to_json(const BehaviourEmission& e) {
  return json{{"accel_mean", e.accel_mean},
              {"load_mean", e.load_mean},
              {"encoder_rate", e.encoder_rate},
              {"noise_sigma", e.noise_sigma}};
}

BehaviourEmission emission_from_json(const json& j) {
  BehaviourEmission e;
  j.at("accel_mean").get_to(e.accel_mean);
  j.at("load_mean").get_to(e.load_mean);
  j.at("encoder_rate").get_to(e.encoder_rate);
  j.at("noise_sigma").get_to(e.noise_sigma);
  return e;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace

EmissionTable load_emission_table(const std::filesystem::path& path) {
  json j = read_json_file(path);
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw DataError(path.string() + ": unsupported emission table version");
    }
    EmissionTable table;
    for (const auto& [code, row] : j.at("behaviours").items()) {
      table.rows[behaviour_from_string(code)] = emission_from_json(row);
    }
    return table;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad emission table: " + e.what());
  }
}

void save_emission_table(const EmissionTable& table,
                         const std::filesystem::path& path) {
  json rows = json::object();
  for (const auto& [b, e] : table.rows) rows[to_string(b)] = emission_to_json(e);
  json j{{"format_version", 1}, {"behaviours", rows}};
  atomic_write(path, j.dump(2) + "\n");
}

int CourseScript::total_ticks() const {
  int total = 0;
  for (const auto& [b, d] : segments) total += d;
  return total;
}

void CourseScript::validate(const LabelSet& label_set) const {
  if (segments.empty()) throw DataError("course script has no segments");
  for (const auto& [b, d] : segments) {
    if (d < 1) throw DataError("segment duration must be >= 1");
    if (!label_set.contains(b)) {
      throw DataError("segment behaviour " + to_string(b) +
                      " not in label set");
    }
  }
}

CourseScript load_course_script(const std::filesystem::path& path) {
  json j = read_json_file(path);
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw DataError(path.string() + ": unsupported script version");
    }
    CourseScript script;
    script.noise_level = j.value("noise_level", 1.0);
    script.rng_seed = j.value("rng_seed", std::uint64_t{0});
    for (const auto& seg : j.at("segments")) {
      script.segments.emplace_back(
          behaviour_from_string(seg.at("behaviour").get<std::string>()),
          seg.at("duration").get<int>());
    }
    return script;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad course script: " + e.what());
  }
}

void save_course_script(const CourseScript& script,
                        const std::filesystem::path& path) {
  json segments = json::array();
  for (const auto& [b, d] : script.segments) {
    segments.push_back({{"behaviour", to_string(b)}, {"duration", d}});
  }
  json j{{"format_version", 1},
         {"noise_level", script.noise_level},
         {"rng_seed", script.rng_seed},
         {"segments", segments}};
  atomic_write(path, j.dump(2) + "\n");
}

CourseScript default_course(std::uint64_t seed, double noise_level) {
  CourseScript script;
  script.rng_seed = seed;
  script.noise_level = noise_level;
  using B = Behaviour;
  script.segments = {
      {B::SW, 250},  {B::TRS, 120}, {B::ST, 150},  {B::WF, 400},
      {B::TL, 150},  {B::WF, 250},  {B::GUR, 200}, {B::WF, 150},
      {B::GDR, 200}, {B::TR, 150},  {B::WF, 200},  {B::GUC, 100},
      {B::WF, 150},  {B::GDC, 100}, {B::RT, 200},  {B::WB, 150},
      {B::ST, 120},  {B::NTW, 200}, {B::TRS, 120}, {B::SW, 250},
  };
  return script;
}

RawSequence simulate_course(const CourseScript& script,
                            const EmissionTable& table,
                            const std::string& participant_id) {
  if (script.segments.empty()) throw DataError("course script has no segments");
  std::mt19937_64 rng(script.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto clamp16 = [](double v) {
    return static_cast<int>(std::clamp(std::llround(v), 0LL, 65535LL));
  };

  RawSequence seq;
  seq.participant_id = participant_id;
  seq.labels.emplace();

  double encoder_pos = 20000;
  std::int64_t tick = 0;
  for (const auto& [behaviour, duration] : script.segments) {
    const BehaviourEmission& e = table.row(behaviour);
    for (int i = 0; i < duration; ++i, ++tick) {
      SensorFrame frame;
      frame.tick = tick;
      frame.channels.resize(kRawChannelCount);
      for (int a = 0; a < 3; ++a) {
        frame.channels[kAccelX + a] = clamp16(
            e.accel_mean[a] + script.noise_level * e.noise_sigma[a] * normal(rng));
      }
      for (int l = 0; l < 4; ++l) {
        frame.channels[kLoadFL + l] =
            clamp16(e.load_mean[l] +
                    script.noise_level * e.noise_sigma[3 + l] * normal(rng));
      }
      encoder_pos += e.encoder_rate +
                     script.noise_level * e.noise_sigma[7] * normal(rng);
      encoder_pos = std::clamp(encoder_pos, 0.0, 65535.0);
      frame.channels[kEncoder] = clamp16(encoder_pos);
      seq.frames.push_back(std::move(frame));
      seq.labels->push_back(behaviour);
    }
  }
  seq.validate();
  return seq;
}

}  // namespace walker
