#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "walker/simgen.hpp"

#include "test_util.hpp"

using namespace walker;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "walker_test_simgen";
  fs::create_directories(dir);
  return dir / name;
}

double channel_mean(const RawSequence& seq, int channel, Behaviour b) {
  double total = 0;
  long count = 0;
  for (int t = 0; t < seq.length(); ++t) {
    if ((*seq.labels)[t] != b) continue;
    total += seq.frames[t].channels[channel];
    ++count;
  }
  REQUIRE(count > 0);
  return total / count;
}

double total_load_mean(const RawSequence& seq, Behaviour b) {
  double total = 0;
  long count = 0;
  for (int t = 0; t < seq.length(); ++t) {
    if ((*seq.labels)[t] != b) continue;
    for (int c = kLoadFL; c <= kLoadRR; ++c) {
      total += seq.frames[t].channels[c];
    }
    ++count;
  }
  REQUIRE(count > 0);
  return total / count;
}

}  // namespace

TEST_CASE("sample_hmm from a one-hot model is deterministic") {
  HmmModel model;
  model.m = 2;
  model.n = 1;
  model.D = 2;
  model.pi = {1, 0};
  model.theta = {{0, 1}, {1, 0}};
  model.phi = {{{1, 0}}, {{0, 1}}};
  model.state_names = {"A", "B"};
  HmmSample sample = sample_hmm(model, 6, 42);
  CHECK(sample.states == std::vector<int>{0, 1, 0, 1, 0, 1});
  for (int t = 0; t < 6; ++t) {
    CHECK(sample.observations.discretized[t][0] == sample.states[t] + 1);
  }
}

TEST_CASE("sample_hmm is seed-deterministic") {
  std::mt19937_64 rng(81);
  HmmModel model = testutil::random_hmm(rng, 3, 2, 4);
  HmmSample a = sample_hmm(model, 500, 7);
  HmmSample b = sample_hmm(model, 500, 7);
  CHECK(a.states == b.states);
  CHECK(a.observations.discretized == b.observations.discretized);
  HmmSample c = sample_hmm(model, 500, 8);
  CHECK(a.states != c.states);
}

TEST_CASE("sample_hmm empirical transition frequencies approach theta") {
  HmmModel model;
  model.m = 2;
  model.n = 1;
  model.D = 2;
  model.pi = {0.5, 0.5};
  model.theta = {{0.8, 0.2}, {0.3, 0.7}};
  model.phi = {{{0.6, 0.4}}, {{0.1, 0.9}}};
  model.state_names = {"A", "B"};
  const int T = 100000;
  HmmSample sample = sample_hmm(model, T, 3);

  std::vector<std::vector<double>> counts(2, std::vector<double>(2, 0));
  for (int t = 1; t < T; ++t) {
    counts[sample.states[t - 1]][sample.states[t]] += 1;
  }
  for (int b = 0; b < 2; ++b) {
    double row = counts[b][0] + counts[b][1];
    for (int b2 = 0; b2 < 2; ++b2) {
      CHECK(std::abs(counts[b][b2] / row - model.theta[b][b2]) < 0.01);
    }
  }
}

TEST_CASE("emission table round trips through json") {
  EmissionTable table = EmissionTable::canonical();
  fs::path path = temp_file("emissions.json");
  save_emission_table(table, path);
  EmissionTable loaded = load_emission_table(path);
  for (const auto& [b, row] : table.rows) {
    const BehaviourEmission& other = loaded.row(b);
    CHECK(row.accel_mean == other.accel_mean);
    CHECK(row.load_mean == other.load_mean);
    CHECK(row.encoder_rate == other.encoder_rate);
    CHECK(row.noise_sigma == other.noise_sigma);
  }
}

TEST_CASE("course script round trips through json") {
  CourseScript script = default_course(5, 0.7);
  fs::path path = temp_file("script.json");
  save_course_script(script, path);
  CourseScript loaded = load_course_script(path);
  CHECK(loaded.segments == script.segments);
  CHECK(loaded.noise_level == script.noise_level);
  CHECK(loaded.rng_seed == script.rng_seed);
}

TEST_CASE("default course covers every behaviour") {
  CourseScript script = default_course(1);
  script.validate(LabelSet::full());
  std::vector<bool> seen(kBehaviourUniverseSize, false);
  for (const auto& [b, ticks] : script.segments) {
    CHECK(ticks >= 1);
    seen[static_cast<int>(b)] = true;
  }
  for (bool s : seen) CHECK(s);
}

TEST_CASE("simulate_course output is valid and labeled per segment") {
  CourseScript script = default_course(2);
  RawSequence seq = simulate_course(script, EmissionTable::canonical(), "p0");
  seq.validate();
  CHECK(seq.participant_id == "p0");
  CHECK(seq.length() == script.total_ticks());
  REQUIRE(seq.labels.has_value());
  int t = 0;
  for (const auto& [b, ticks] : script.segments) {
    for (int i = 0; i < ticks; ++i) CHECK((*seq.labels)[t++] == b);
  }
}

TEST_CASE("same seed gives bit-identical output") {
  CourseScript script = default_course(9);
  RawSequence a = simulate_course(script, EmissionTable::canonical());
  RawSequence b = simulate_course(script, EmissionTable::canonical());
  REQUIRE(a.length() == b.length());
  for (int t = 0; t < a.length(); ++t) {
    CHECK(a.frames[t].channels == b.frames[t].channels);
  }
}

TEST_CASE("zero noise gives piecewise-deterministic channels") {
  CourseScript script = default_course(3, 0.0);
  RawSequence seq = simulate_course(script, EmissionTable::canonical());
  // Within an NTW segment at zero noise, non-encoder channels are constant.
  int start = -1;
  for (int t = 0; t < seq.length(); ++t) {
    if ((*seq.labels)[t] == Behaviour::NTW) {
      start = t;
      break;
    }
  }
  REQUIRE(start >= 0);
  for (int c = 0; c < kEncoder; ++c) {
    CHECK(seq.frames[start].channels[c] == seq.frames[start + 1].channels[c]);
  }
}

TEST_CASE("behaviour hypotheses hold in simulated data") {
  CourseScript script = default_course(4);
  RawSequence seq = simulate_course(script, EmissionTable::canonical());

  SUBCASE("sitting loads the walker far more than walking") {
    CHECK(total_load_mean(seq, Behaviour::SW) >
          2 * total_load_mean(seq, Behaviour::WF));
  }
  SUBCASE("not touching leaves the load near zero") {
    CHECK(total_load_mean(seq, Behaviour::NTW) <
          0.05 * total_load_mean(seq, Behaviour::WF));
  }
  SUBCASE("walking backwards decreases the encoder") {
    int first = -1, last = -1;
    for (int t = 0; t < seq.length(); ++t) {
      if ((*seq.labels)[t] == Behaviour::WB) {
        if (first < 0) first = t;
        last = t;
      }
    }
    REQUIRE(first >= 0);
    CHECK(seq.frames[last].channels[kEncoder] <
          seq.frames[first].channels[kEncoder]);
  }
  SUBCASE("left turns load the left side more") {
    double left = channel_mean(seq, kLoadFL, Behaviour::TL) +
                  channel_mean(seq, kLoadRL, Behaviour::TL);
    double right = channel_mean(seq, kLoadFR, Behaviour::TL) +
                   channel_mean(seq, kLoadRR, Behaviour::TL);
    CHECK(left > right);
  }
  SUBCASE("ramps shift the forward accelerometer axis") {
    CHECK(channel_mean(seq, kAccelX, Behaviour::GUR) >
          channel_mean(seq, kAccelX, Behaviour::WF));
  }
}

TEST_CASE("all simulated values stay within sensor range") {
  CourseScript script = default_course(6, 5.0);  // exaggerated noise
  RawSequence seq = simulate_course(script, EmissionTable::canonical());
  for (const SensorFrame& f : seq.frames) {
    for (int v : f.channels) {
      CHECK(v >= 0);
      CHECK(v <= kMaxSensorValue);
    }
  }
}
