#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "walker/hmm.hpp"
#include "walker/types.hpp"

namespace walker {

struct HmmSample {
  std::vector<int> states;
  FeatureSequence observations;  // discretized bins, one column per sensor
};

// Ancestral sampling from an HMM: B_1 ~ pi, B_t ~ theta row, each sensor
// independently from phi. Deterministic given the seed.
HmmSample sample_hmm(const HmmModel& model, int length, std::uint64_t seed);

// Per-behaviour channel statistics for the scripted walker simulator:
// channel value = mean + offset trend + Gaussian noise, clamped to 16 bits.
// The encoder channel integrates encoder_rate ticks per sample instead.
struct BehaviourEmission {
  std::array<double, 3> accel_mean = {32768, 32768, 32768};
  std::array<double, 4> load_mean = {100, 100, 100, 100};  // fl, fr, rl, rr
  double encoder_rate = 0;  // encoder ticks per 20 ms sample, signed
  std::array<double, 8> noise_sigma = {150, 150, 150, 300, 300, 300, 300, 1};
};

struct EmissionTable {
  std::map<Behaviour, BehaviourEmission> rows;

  const BehaviourEmission& row(Behaviour b) const;
  static EmissionTable canonical();
};

EmissionTable load_emission_table(const std::filesystem::path& path);
void save_emission_table(const EmissionTable& table,
                         const std::filesystem::path& path);

struct CourseScript {
  std::vector<std::pair<Behaviour, int>> segments;  // behaviour, ticks
  double noise_level = 1.0;
  std::uint64_t rng_seed = 0;

  int total_ticks() const;
  void validate(const LabelSet& label_set) const;
};

CourseScript load_course_script(const std::filesystem::path& path);
void save_course_script(const CourseScript& script,
                        const std::filesystem::path& path);

// A full pass over every behaviour, loosely following the experimental
// courses' segment order.
CourseScript default_course(std::uint64_t seed, double noise_level = 1.0);

RawSequence simulate_course(const CourseScript& script,
                            const EmissionTable& table,
                            const std::string& participant_id = "sim");

}  // namespace walker
