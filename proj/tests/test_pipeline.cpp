#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "walker/pipeline.hpp"
#include "walker/simgen.hpp"

using namespace walker;

namespace {

// A short scripted run per participant; seeds differ so participants differ.
std::vector<RawSequence> small_corpus(int participants, int runs_each) {
  std::vector<RawSequence> out;
  for (int p = 0; p < participants; ++p) {
    for (int r = 0; r < runs_each; ++r) {
      CourseScript script = default_course(100 * p + r);
      // Shorten every segment to keep the tests fast.
      for (auto& [b, ticks] : script.segments) ticks = std::max(10, ticks / 20);
      RawSequence seq = simulate_course(script, EmissionTable::canonical(),
                                        "p" + std::to_string(p));
      out.push_back(std::move(seq));
    }
  }
  return out;
}

RunConfig fast_config() {
  RunConfig config;
  config.bins = 8;
  config.window_grid = {0, 25};
  return config;
}

}  // namespace

TEST_CASE("train_predictor produces labeled predictions for each family") {
  std::vector<RawSequence> corpus = small_corpus(1, 1);
  RunConfig config = fast_config();
  Dataset data;
  data.label_set = LabelSet::full();
  Calibration calib = fit_load_range(corpus, config.ticks_per_meter);
  data.sequences.push_back(
      build_features(corpus[0], FeatureMode::COP, calib));

  SUBCASE("supervised hmm") {
    config.family = ModelFamily::kHmmMl;
    TrainedPredictor p = train_predictor(data, config);
    CHECK(p.hmm.m == 13);
    CHECK(!p.hmm.discretizer_edges.empty());
    std::vector<Behaviour> predicted = p.predict(data.sequences[0]);
    CHECK(predicted.size() == data.sequences[0].values.size());
  }
  SUBCASE("em with state matching") {
    config.family = ModelFamily::kHmmEm;
    config.num_states = 5;
    config.restarts = 2;
    config.em_max_iters = 15;
    TrainedPredictor p = train_predictor(data, config);
    CHECK(p.hmm.m == 5);
    CHECK(p.state_to_behaviour.size() == 5);
    CHECK(!p.trace.empty());
    // Matched state names are behaviour codes.
    for (const std::string& name : p.hmm.state_names) {
      CHECK_NOTHROW(behaviour_from_string(name));
    }
  }
  SUBCASE("gibbs with state matching") {
    config.family = ModelFamily::kHmmGibbs;
    config.num_states = 5;
    config.sweeps = 20;
    config.burn_in = 10;
    TrainedPredictor p = train_predictor(data, config);
    CHECK(p.hmm.m == 5);
    CHECK(p.trace.size() == 20);
  }
  SUBCASE("crf") {
    config.family = ModelFamily::kCrf;
    config.crf_max_iters = 5;
    TrainedPredictor p = train_predictor(data, config);
    CHECK(p.crf.weights.size() == 2u * 13 * 12 * 7 + 1);
    std::vector<Behaviour> predicted = p.predict(data.sequences[0]);
    CHECK(predicted.size() == data.sequences[0].values.size());
  }
}

TEST_CASE("loocv exp2: one fold per participant") {
  std::vector<RawSequence> corpus = small_corpus(3, 1);
  RunConfig config = fast_config();
  config.protocol = Protocol::kExp2;
  CrossvalResult result = loocv(corpus, LabelSet::full(), config);
  CHECK(result.folds.size() == 3);
  CHECK(result.pooled.size() == config.window_grid.size());
  for (const FoldReport& fold : result.folds) {
    CHECK(fold.by_window.size() == config.window_grid.size());
  }
}

TEST_CASE("loocv exp1: sub-folds merge into one fold per participant") {
  std::vector<RawSequence> corpus = small_corpus(3, 2);
  RunConfig config = fast_config();
  config.protocol = Protocol::kExp1;
  CrossvalResult result = loocv(corpus, LabelSet::full(), config);
  CHECK(result.folds.size() == 3);
  // Each participant's fold covers both of their runs.
  long total_ticks = 0;
  for (const RawSequence& seq : corpus) total_ticks += seq.length();
  long fold_ticks = 0;
  for (const FoldReport& fold : result.folds) {
    fold_ticks += fold.by_window[0].ticks;
  }
  CHECK(fold_ticks == total_ticks);
}

TEST_CASE("loocv exp1 rejects single-run participants") {
  std::vector<RawSequence> corpus = small_corpus(3, 1);
  RunConfig config = fast_config();
  config.protocol = Protocol::kExp1;
  CHECK_THROWS_AS(loocv(corpus, LabelSet::full(), config), DataError);
}

TEST_CASE("loocv requires at least two participants") {
  std::vector<RawSequence> corpus = small_corpus(1, 2);
  RunConfig config = fast_config();
  CHECK_THROWS_AS(loocv(corpus, LabelSet::full(), config), DataError);
}

TEST_CASE("loocv pooled accuracy is the tick-weighted fold mean") {
  std::vector<RawSequence> corpus = small_corpus(3, 1);
  RunConfig config = fast_config();
  CrossvalResult result = loocv(corpus, LabelSet::full(), config);
  double weighted = 0;
  long ticks = 0;
  for (const FoldReport& fold : result.folds) {
    weighted += fold.by_window[0].overall_accuracy * fold.by_window[0].ticks;
    ticks += fold.by_window[0].ticks;
  }
  CHECK(result.pooled[0].overall_accuracy ==
        doctest::Approx(weighted / ticks).epsilon(1e-12));
}

TEST_CASE("participant calibrations are grouped by id") {
  std::vector<RawSequence> corpus = small_corpus(2, 2);
  RunConfig config = fast_config();
  auto calibrations = participant_calibrations(corpus, config);
  CHECK(calibrations.size() == 2);
  CHECK(calibrations.count("p0") == 1);
  CHECK(calibrations.count("p1") == 1);
}

TEST_CASE("model family and protocol strings round trip") {
  for (auto family : {ModelFamily::kHmmMl, ModelFamily::kHmmEm,
                      ModelFamily::kHmmGibbs, ModelFamily::kCrf}) {
    CHECK(model_family_from_string(to_string(family)) == family);
  }
  CHECK(protocol_from_string("exp1") == Protocol::kExp1);
  CHECK(protocol_from_string("EXP2") == Protocol::kExp2);
  CHECK_THROWS_AS(model_family_from_string("nope"), DataError);
}
