#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "walker/crf.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

using namespace walker;

namespace {

Dataset labeled_real(const std::vector<std::vector<double>>& values,
                     const std::vector<Behaviour>& labels,
                     const LabelSet& label_set) {
  Dataset data;
  data.label_set = label_set;
  FeatureSequence seq;
  for (size_t k = 0; k < values[0].size(); ++k) {
    seq.feature_names.push_back("f" + std::to_string(k));
  }
  for (const auto& row : values) seq.values.push_back(row);
  seq.labels = labels;
  data.sequences.push_back(std::move(seq));
  return data;
}

// Threshold-separable data: feature 0 is far below 0 under the first label
// and far above 0 under the second.
Dataset separable_dataset(int T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0, 0.1);
  LabelSet ls({Behaviour::WF, Behaviour::ST});
  std::vector<std::vector<double>> values;
  std::vector<Behaviour> labels;
  for (int t = 0; t < T; ++t) {
    bool second = (t / 25) % 2 == 1;
    labels.push_back(second ? Behaviour::ST : Behaviour::WF);
    values.push_back({(second ? 3.0 : -3.0) + noise(rng), noise(rng)});
  }
  return labeled_real(values, labels, ls);
}

}  // namespace

TEST_CASE("threshold bank indexing covers every ordered pair once") {
  ThresholdBank bank(3, 2);
  std::vector<bool> seen(3 * 2 * 2, false);
  for (int b = 0; b < 3; ++b) {
    for (int b2 = 0; b2 < 3; ++b2) {
      if (b2 == b) continue;
      for (int k = 0; k < 2; ++k) {
        int idx = bank.entry_index(b, b2, k);
        REQUIRE(idx >= 0);
        REQUIRE(idx < static_cast<int>(seen.size()));
        CHECK_FALSE(seen[idx]);
        seen[idx] = true;
      }
    }
  }
}

TEST_CASE("fit_thresholds takes the midpoint of class medians") {
  LabelSet ls({Behaviour::WF, Behaviour::ST});
  // WF has {0,0,1}, ST has {9,10,11} -> midpoint of medians 0 and 10 is 5.
  Dataset data = labeled_real({{0.0}, {0.0}, {1.0}, {9.0}, {10.0}, {11.0}},
                              {Behaviour::WF, Behaviour::WF, Behaviour::WF,
                               Behaviour::ST, Behaviour::ST, Behaviour::ST},
                              ls);
  ThresholdBank bank = fit_thresholds(data);
  CHECK(bank.threshold(0, 1, 0) == doctest::Approx(5.0));
  CHECK(bank.relevant(0, 1, 0));
}

TEST_CASE("single-tick classes give the midpoint") {
  LabelSet ls({Behaviour::WF, Behaviour::ST});
  Dataset data = labeled_real({{2.0}, {4.0}},
                              {Behaviour::WF, Behaviour::ST}, ls);
  ThresholdBank bank = fit_thresholds(data);
  CHECK(bank.threshold(0, 1, 0) == doctest::Approx(3.0));
}

TEST_CASE("identical class distributions fall back to the global mean") {
  LabelSet ls({Behaviour::WF, Behaviour::ST});
  Dataset data = labeled_real({{1.0}, {2.0}, {1.0}, {2.0}},
                              {Behaviour::WF, Behaviour::WF, Behaviour::ST,
                               Behaviour::ST},
                              ls);
  ThresholdBank bank = fit_thresholds(data);
  CHECK_FALSE(bank.relevant(0, 1, 0));
  CHECK(bank.threshold(0, 1, 0) == doctest::Approx(1.5));
}

TEST_CASE("feature_vector fires one indicator per pair and feature") {
  std::mt19937_64 rng(51);
  CrfModel model = testutil::random_crf(rng, 2, 1);
  std::vector<double> obs = {0.3};
  std::vector<int> active = feature_vector(obs, 0, model);
  CHECK(active.size() == 1);  // (m-1) * n

  // Equality at the threshold counts as not-exceed.
  model.bank.set(0, 1, 0, 0.3, true);
  active = feature_vector(obs, 0, model);
  CHECK(active == std::vector<int>{model.weight_index(0, 1, 0, false)});

  model.bank.set(0, 1, 0, 0.2999, true);
  active = feature_vector(obs, 0, model);
  CHECK(active == std::vector<int>{model.weight_index(0, 1, 0, true)});
}

TEST_CASE("weight vector length is 2 m(m-1) n + 1") {
  std::mt19937_64 rng(52);
  CrfModel model = testutil::random_crf(rng, 3, 2);
  CHECK(model.weights.size() == 2 * 3 * 2 * 2 + 1);
}

TEST_CASE("zero weights give uniform likelihood T log m") {
  std::mt19937_64 rng(53);
  CrfModel model = testutil::random_crf(rng, 3, 2);
  std::fill(model.weights.begin(), model.weights.end(), 0.0);

  Dataset data;
  data.label_set = model.label_set;
  FeatureSequence seq = testutil::random_real_obs(rng, 15, 2);
  seq.labels = std::vector<Behaviour>(15, model.label_set.at(1));
  data.sequences.push_back(seq);

  NllResult r = nll_and_gradient(model.weights, model, data);
  CHECK(r.value == doctest::Approx(15 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("log Z matches exhaustive summation") {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 15; ++trial) {
    int m = 2 + static_cast<int>(rng() % 2);
    int T = 3 + static_cast<int>(rng() % 3);
    CrfModel model = testutil::random_crf(rng, m, 2);
    FeatureSequence obs = testutil::random_real_obs(rng, T, 2);

    // NLL = log Z - score(labels); recover log Z by adding the path score.
    std::vector<int> labels(T, 0);
    for (int& b : labels) b = static_cast<int>(rng() % m);
    Dataset data;
    data.label_set = model.label_set;
    FeatureSequence labeled = obs;
    labeled.labels = std::vector<Behaviour>();
    for (int b : labels) labeled.labels->push_back(model.label_set.at(b));
    data.sequences.push_back(labeled);

    std::vector<double> zero_penalty_weights = model.weights;
    CrfModel no_penalty = model;
    no_penalty.sigma2 = 1e300;  // make the shrinkage term negligible
    NllResult r = nll_and_gradient(zero_penalty_weights, no_penalty, data);
    double log_z = r.value + oracle::crf_score(model, obs, labels);
    CHECK(log_z ==
          doctest::Approx(oracle::enum_crf_log_z(model, obs)).epsilon(1e-9));
  }
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(55);
  const int m = 3, n = 2, T = 20;
  CrfModel model = testutil::random_crf(rng, m, n);
  Dataset data;
  data.label_set = model.label_set;
  FeatureSequence seq = testutil::random_real_obs(rng, T, n);
  seq.labels = std::vector<Behaviour>();
  for (int t = 0; t < T; ++t) {
    seq.labels->push_back(model.label_set.at(static_cast<int>(rng() % m)));
  }
  data.sequences.push_back(seq);

  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> w(model.weights.size());
    std::normal_distribution<double> dist(0, 0.5);
    for (double& v : w) v = dist(rng);
    NllResult r = nll_and_gradient(w, model, data);
    auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& x) {
          return nll_and_gradient(x, model, data).value;
        },
        w, 1e-5);
    for (size_t i = 0; i < w.size(); ++i) {
      double scale = std::max({std::abs(fd[i]), std::abs(r.gradient[i]), 1.0});
      CHECK(std::abs(r.gradient[i] - fd[i]) / scale <= 1e-5);
    }
  }
}

TEST_CASE("shifting every pairwise weight leaves probabilities invariant") {
  // Every tick fires exactly one of {exceed, not-exceed} per (pair, feature),
  // so adding c to all of those weights adds c * (m-1) * n to every path
  // score and cancels in the normalizer.
  std::mt19937_64 rng(56);
  CrfModel model = testutil::random_crf(rng, 2, 2);
  Dataset data;
  data.label_set = model.label_set;
  FeatureSequence seq = testutil::random_real_obs(rng, 10, 2);
  seq.labels = std::vector<Behaviour>(10, model.label_set.at(0));
  data.sequences.push_back(seq);

  CrfModel no_penalty = model;
  no_penalty.sigma2 = 1e300;
  double before = nll_and_gradient(model.weights, no_penalty, data).value;
  std::vector<double> shifted = model.weights;
  for (size_t i = 0; i + 1 < shifted.size(); ++i) shifted[i] += 2.5;
  double after = nll_and_gradient(shifted, no_penalty, data).value;
  CHECK(before == doctest::Approx(after).epsilon(1e-9));
}

TEST_CASE("viterbi matches exhaustive argmax") {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 15; ++trial) {
    int m = 2 + static_cast<int>(rng() % 2);
    int T = 4 + static_cast<int>(rng() % 3);
    CrfModel model = testutil::random_crf(rng, m, 2);
    FeatureSequence obs = testutil::random_real_obs(rng, T, 2);

    std::vector<Behaviour> decoded = viterbi_decode(model, obs);
    std::vector<int> decoded_idx;
    for (Behaviour b : decoded) {
      decoded_idx.push_back(model.label_set.index_of(b));
    }
    oracle::CrfArgmax best = oracle::enum_crf_argmax(model, obs);
    CHECK(oracle::crf_score(model, obs, decoded_idx) ==
          doctest::Approx(best.score).epsilon(1e-9));
    if (best.unique) CHECK(decoded_idx == best.labels);
  }
}

TEST_CASE("viterbi tie rules") {
  std::mt19937_64 rng(58);
  CrfModel model = testutil::random_crf(rng, 3, 1);

  SUBCASE("zero weights return the first label repeated") {
    std::fill(model.weights.begin(), model.weights.end(), 0.0);
    FeatureSequence obs = testutil::random_real_obs(rng, 6, 1);
    std::vector<Behaviour> decoded = viterbi_decode(model, obs);
    for (Behaviour b : decoded) CHECK(b == model.label_set.at(0));
  }
  SUBCASE("large nu forces persistence") {
    model.weights.back() = 100.0;
    FeatureSequence obs = testutil::random_real_obs(rng, 2, 1);
    std::vector<Behaviour> decoded = viterbi_decode(model, obs);
    CHECK(decoded[0] == decoded[1]);
  }
}

TEST_CASE("training decreases the objective and separates separable data") {
  Dataset data = separable_dataset(300, 61);
  CrfTrainConfig config;
  config.max_iters = 40;
  std::vector<CrfTraceRow> trace;
  CrfModel model = train_crf(data, config, &trace);

  REQUIRE(!trace.empty());
  for (size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i].objective <= trace[i - 1].objective + 1e-9);
  }
  CHECK(trace.back().objective <
        300 * std::log(2.0));  // beats the zero-weight model

  const FeatureSequence& seq = data.sequences[0];
  std::vector<Behaviour> decoded = viterbi_decode(model, seq);
  int correct = 0;
  for (int t = 0; t < seq.length(); ++t) {
    if (decoded[t] == (*seq.labels)[t]) ++correct;
  }
  CHECK(correct >= 0.99 * seq.length());
}

TEST_CASE("sigma2 changes accuracy only mildly on separable data") {
  Dataset train = separable_dataset(300, 62);
  Dataset test = separable_dataset(300, 63);
  std::vector<double> accs;
  for (double sigma2 : {0.1, 1.0, 10.0}) {
    CrfTrainConfig config;
    config.max_iters = 40;
    config.sigma2 = sigma2;
    CrfModel model = train_crf(train, config);
    const FeatureSequence& seq = test.sequences[0];
    std::vector<Behaviour> decoded = viterbi_decode(model, seq);
    int correct = 0;
    for (int t = 0; t < seq.length(); ++t) {
      if (decoded[t] == (*seq.labels)[t]) ++correct;
    }
    accs.push_back(static_cast<double>(correct) / seq.length());
  }
  for (double a : accs) {
    CHECK(std::abs(a - accs[1]) < 0.05);
  }
}

TEST_CASE("training is deterministic") {
  Dataset data = separable_dataset(150, 64);
  CrfTrainConfig config;
  config.max_iters = 15;
  CrfModel a = train_crf(data, config);
  CrfModel b = train_crf(data, config);
  CHECK(a.weights == b.weights);
}
