#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "walker/hmm.hpp"
#include "walker/simgen.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

using namespace walker;

namespace {

Dataset labeled_dataset(const std::vector<std::vector<int>>& bins0,
                        const std::vector<Behaviour>& labels,
                        const LabelSet& label_set, int n) {
  Dataset data;
  data.label_set = label_set;
  FeatureSequence seq = testutil::make_obs(bins0, n);
  seq.labels = labels;
  data.sequences.push_back(std::move(seq));
  return data;
}

}  // namespace

TEST_CASE("persistence transition rows") {
  auto rows = persistence_transitions(13, 4000);
  for (int b = 0; b < 13; ++b) {
    double sum = 0;
    for (int b2 = 0; b2 < 13; ++b2) {
      double expected = b2 == b ? 4000.0 / 4012.0 : 1.0 / 4012.0;
      CHECK(rows[b][b2] == expected);
      sum += rows[b][b2];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("supervised transition counts without smoothing") {
  // labels A,A,B,B,B -> theta_A = [1/2, 1/2], theta_B = [0, 1]
  LabelSet ab({Behaviour::NTW, Behaviour::ST});
  std::vector<Behaviour> labels = {Behaviour::NTW, Behaviour::NTW,
                                   Behaviour::ST, Behaviour::ST,
                                   Behaviour::ST};
  Dataset data = labeled_dataset({{0}, {0}, {0}, {0}, {0}}, labels, ab, 1);
  SupervisedOptions opts;
  opts.transitions = TransitionModel::kLearned;
  opts.epsilon = 0;
  HmmModel model = fit_supervised(data, opts);
  CHECK(model.theta[0][0] == doctest::Approx(0.5));
  CHECK(model.theta[0][1] == doctest::Approx(0.5));
  CHECK(model.theta[1][0] == 0.0);
  CHECK(model.theta[1][1] == 1.0);
}

TEST_CASE("supervised emission counts without smoothing") {
  // labels A,A,B with bins 1,2,2 -> phi_A = [1/2, 1/2], phi_B = [0, 1]
  LabelSet ab({Behaviour::NTW, Behaviour::ST});
  std::vector<Behaviour> labels = {Behaviour::NTW, Behaviour::NTW,
                                   Behaviour::ST};
  Dataset data = labeled_dataset({{0}, {1}, {1}}, labels, ab, 1);
  SupervisedOptions opts;
  opts.transitions = TransitionModel::kLearned;
  opts.epsilon = 0;
  opts.bins = 2;
  HmmModel model = fit_supervised(data, opts);
  CHECK(model.phi[0][0][0] == doctest::Approx(0.5));
  CHECK(model.phi[0][0][1] == doctest::Approx(0.5));
  CHECK(model.phi[1][0][0] == 0.0);
  CHECK(model.phi[1][0][1] == 1.0);
}

TEST_CASE("supervised fit honors smoothing and priors") {
  LabelSet ab({Behaviour::NTW, Behaviour::ST});
  std::vector<Behaviour> labels = {Behaviour::NTW, Behaviour::NTW,
                                   Behaviour::ST};
  Dataset data = labeled_dataset({{0}, {1}, {1}}, labels, ab, 1);

  SupervisedOptions opts;
  opts.transitions = TransitionModel::kLearned;
  opts.epsilon = 1;
  opts.bins = 2;

  SUBCASE("learned prior is the smoothed pooled marginal frequency") {
    opts.prior = PriorModel::kLearned;
    HmmModel model = fit_supervised(data, opts);
    CHECK(model.pi[0] == doctest::Approx((2.0 + 1) / (3 + 2)));
    CHECK(model.pi[1] == doctest::Approx((1.0 + 1) / (3 + 2)));
  }
  SUBCASE("learned prior without smoothing is the exact frequency") {
    opts.prior = PriorModel::kLearned;
    opts.epsilon = 0;
    HmmModel model = fit_supervised(data, opts);
    CHECK(model.pi[0] == doctest::Approx(2.0 / 3.0));
    CHECK(model.pi[1] == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("uniform prior") {
    opts.prior = PriorModel::kUniform;
    HmmModel model = fit_supervised(data, opts);
    CHECK(model.pi[0] == 0.5);
  }
  SUBCASE("epsilon smoothing fills zero counts") {
    HmmModel model = fit_supervised(data, opts);
    // B only appears at the last tick: its row is pure smoothing,
    // (0 + 1) / (0 + 2*1).
    CHECK(model.theta[1][0] == doctest::Approx(0.5));
    model.validate();
  }
  SUBCASE("absent behaviour with epsilon 0 is an error") {
    Dataset missing = data;
    missing.label_set = LabelSet::full();
    opts.epsilon = 0;
    CHECK_THROWS_AS(fit_supervised(missing, opts), DataError);
  }
}

TEST_CASE("filter_predict single step favors the likely state") {
  HmmModel model;
  model.m = 2;
  model.n = 1;
  model.D = 2;
  model.pi = {0.5, 0.5};
  model.theta = {{0.5, 0.5}, {0.5, 0.5}};
  model.phi = {{{0.9, 0.1}}, {{0.2, 0.8}}};
  model.state_names = {"A", "B"};
  FeatureSequence obs = testutil::make_obs({{0}}, 1);
  FilterResult r = filter_predict(model, obs);
  CHECK(r.states[0] == 0);
  CHECK(r.marginals[0][0] == doctest::Approx(0.9 / 1.1));
}

TEST_CASE("deterministic model reproduces its own state sequence") {
  HmmModel model;
  model.m = 2;
  model.n = 1;
  model.D = 2;
  model.pi = {1, 0};
  model.theta = {{0, 1}, {1, 0}};  // strict alternation
  model.phi = {{{1, 0}}, {{0, 1}}};
  model.state_names = {"A", "B"};
  FeatureSequence obs = testutil::make_obs({{0}, {1}, {0}, {1}}, 1);
  FilterResult r = filter_predict(model, obs);
  CHECK(r.states == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("filtered marginals match brute-force enumeration") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    int m = 2 + static_cast<int>(rng() % 2);
    int n = 1 + static_cast<int>(rng() % 2);
    int D = 2 + static_cast<int>(rng() % 2);
    int T = 3 + static_cast<int>(rng() % 4);
    HmmModel model = testutil::random_hmm(rng, m, n, D);
    FeatureSequence obs = testutil::random_obs(rng, T, n, D);

    FilterResult fast = filter_predict(model, obs);
    auto slow = oracle::enum_filtered_marginals(model, obs);
    for (int t = 0; t < T; ++t) {
      for (int b = 0; b < m; ++b) {
        CHECK(fast.marginals[t][b] ==
              doctest::Approx(slow[t][b]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("filtering is causal") {
  std::mt19937_64 rng(32);
  HmmModel model = testutil::random_hmm(rng, 3, 2, 3);
  FeatureSequence full = testutil::random_obs(rng, 20, 2, 3);
  FilterResult all = filter_predict(model, full);

  FeatureSequence prefix = full;
  prefix.values.resize(12);
  prefix.discretized.resize(12);
  FilterResult part = filter_predict(model, prefix);
  for (int t = 0; t < 12; ++t) {
    CHECK(part.states[t] == all.states[t]);
    CHECK(part.marginals[t] == all.marginals[t]);
  }
}

TEST_CASE("filter marginals sum to one") {
  std::mt19937_64 rng(33);
  HmmModel model = testutil::random_hmm(rng, 4, 2, 3);
  FeatureSequence obs = testutil::random_obs(rng, 50, 2, 3);
  FilterResult r = filter_predict(model, obs);
  for (const auto& row : r.marginals) {
    double sum = 0;
    for (double v : row) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("all-zero emission row fails with the tick in the message") {
  HmmModel model;
  model.m = 2;
  model.n = 1;
  model.D = 2;
  model.pi = {1, 0};
  model.theta = {{1, 0}, {0, 1}};
  model.phi = {{{1, 0}}, {{0, 1}}};
  model.state_names = {"A", "B"};
  FeatureSequence obs = testutil::make_obs({{0}, {1}}, 1);  // impossible at t=1
  CHECK_THROWS_WITH_AS(filter_predict(model, obs), doctest::Contains("1"),
                       NumericError);
}

TEST_CASE("log_likelihood special cases") {
  SUBCASE("single state chain is a sum of emission logs") {
    HmmModel model;
    model.m = 1;
    model.n = 1;
    model.D = 2;
    model.pi = {1};
    model.theta = {{1}};
    model.phi = {{{0.25, 0.75}}};
    model.state_names = {"A"};
    FeatureSequence obs = testutil::make_obs({{0}, {1}, {1}}, 1);
    CHECK(log_likelihood(model, obs) ==
          doctest::Approx(std::log(0.25) + 2 * std::log(0.75)));
  }
  SUBCASE("uniform model gives T log(1/D)") {
    HmmModel model;
    model.m = 2;
    model.n = 1;
    model.D = 3;
    model.pi = {0.5, 0.5};
    model.theta = {{0.5, 0.5}, {0.5, 0.5}};
    model.phi = {{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, {{1.0 / 3, 1.0 / 3, 1.0 / 3}}};
    model.state_names = {"A", "B"};
    FeatureSequence obs = testutil::make_obs({{0}, {2}}, 1);
    CHECK(log_likelihood(model, obs) ==
          doctest::Approx(2 * std::log(1.0 / 3)));
  }
}

TEST_CASE("log_likelihood matches exhaustive path enumeration") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 25; ++trial) {
    int m = 2 + static_cast<int>(rng() % 2);
    int T = 4 + static_cast<int>(rng() % 3);
    HmmModel model = testutil::random_hmm(rng, m, 2, 3);
    FeatureSequence obs = testutil::random_obs(rng, T, 2, 3);
    CHECK(log_likelihood(model, obs) ==
          doctest::Approx(oracle::enum_log_likelihood(model, obs))
              .epsilon(1e-10));
  }
}

TEST_CASE("em is a fixed point at a deterministic generator") {
  HmmModel truth;
  truth.m = 2;
  truth.n = 1;
  truth.D = 2;
  truth.pi = {1, 0};
  truth.theta = {{0, 1}, {1, 0}};
  truth.phi = {{{1, 0}}, {{0, 1}}};
  truth.state_names = {"A", "B"};
  HmmSample sample = sample_hmm(truth, 40, 5);

  Dataset data;
  data.label_set = LabelSet::full();
  data.sequences.push_back(sample.observations);

  // One restart, and the likelihood trace must be flat at the optimum when
  // accumulate starts from the truth: run a single EM iteration via fit_em
  // and check monotonicity instead (the public interface seeds its own
  // starting points).
  EmOptions opts;
  opts.num_states = 2;
  opts.restarts = 3;
  opts.max_iters = 50;
  opts.seed = 7;
  opts.bins = 2;
  EmResult r = fit_em(data, opts);
  for (size_t i = 1; i < r.iteration_log_likelihoods.size(); ++i) {
    CHECK(r.iteration_log_likelihoods[i] >=
          r.iteration_log_likelihoods[i - 1] - 1e-9);
  }
  // Deterministic data is perfectly explainable; EM should get close to the
  // zero log-likelihood of the generating model.
  CHECK(r.log_likelihood > -0.01);
}

TEST_CASE("em likelihood never decreases on random data") {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 5; ++trial) {
    Dataset data;
    data.label_set = LabelSet::full();
    data.sequences.push_back(testutil::random_obs(rng, 100, 2, 4));
    EmOptions opts;
    opts.num_states = 3;
    opts.restarts = 2;
    opts.max_iters = 30;
    opts.seed = trial;
    opts.bins = 4;
    EmResult r = fit_em(data, opts);
    REQUIRE(!r.iteration_log_likelihoods.empty());
    for (size_t i = 1; i < r.iteration_log_likelihoods.size(); ++i) {
      CHECK(r.iteration_log_likelihoods[i] >=
            r.iteration_log_likelihoods[i - 1] - 1e-9);
    }
    r.model.validate();
  }
}

TEST_CASE("em restarts are deterministic given the seed") {
  std::mt19937_64 rng(36);
  Dataset data;
  data.label_set = LabelSet::full();
  data.sequences.push_back(testutil::random_obs(rng, 80, 2, 3));
  EmOptions opts;
  opts.num_states = 2;
  opts.restarts = 4;
  opts.max_iters = 20;
  opts.seed = 99;
  opts.bins = 3;
  EmResult a = fit_em(data, opts);
  EmResult b = fit_em(data, opts);
  CHECK(a.model == b.model);
  CHECK(a.log_likelihood == b.log_likelihood);
}

TEST_CASE("match_states majority and tie rules") {
  LabelSet ws({Behaviour::WF, Behaviour::ST});
  SUBCASE("simple majority") {
    std::vector<std::vector<int>> latent = {{0, 0, 1}};
    std::vector<std::vector<Behaviour>> refs = {
        {Behaviour::WF, Behaviour::WF, Behaviour::ST}};
    auto mapping = match_states(latent, refs, 2, ws);
    CHECK(mapping[0] == Behaviour::WF);
    CHECK(mapping[1] == Behaviour::ST);
  }
  SUBCASE("50/50 ties break toward the earlier member") {
    std::vector<std::vector<int>> latent = {{0, 0}};
    std::vector<std::vector<Behaviour>> refs = {
        {Behaviour::ST, Behaviour::WF}};
    auto mapping = match_states(latent, refs, 1, ws);
    CHECK(mapping[0] == Behaviour::WF);
  }
  SUBCASE("never-emitted state maps to the global majority") {
    std::vector<std::vector<int>> latent = {{0, 0, 0}};
    std::vector<std::vector<Behaviour>> refs = {
        {Behaviour::ST, Behaviour::ST, Behaviour::WF}};
    auto mapping = match_states(latent, refs, 2, ws);
    CHECK(mapping[1] == Behaviour::ST);
  }
  SUBCASE("many-to-one mapping is allowed") {
    std::vector<std::vector<int>> latent = {{0, 1, 2}};
    std::vector<std::vector<Behaviour>> refs = {
        {Behaviour::WF, Behaviour::WF, Behaviour::WF}};
    auto mapping = match_states(latent, refs, 3, ws);
    for (Behaviour b : mapping) CHECK(b == Behaviour::WF);
  }
}

TEST_CASE("match_states is permutation invariant") {
  std::mt19937_64 rng(37);
  LabelSet ls({Behaviour::WF, Behaviour::ST, Behaviour::TL});
  std::vector<int> latent(60);
  std::vector<Behaviour> ref(60);
  for (int t = 0; t < 60; ++t) {
    latent[t] = static_cast<int>(rng() % 3);
    ref[t] = ls.at(static_cast<int>(rng() % 3));
  }
  std::vector<std::vector<int>> lat = {latent};
  std::vector<std::vector<Behaviour>> refs = {ref};
  auto base = match_states(lat, refs, 3, ls);

  std::vector<int> perm = {2, 0, 1};
  std::vector<int> permuted(60);
  for (int t = 0; t < 60; ++t) permuted[t] = perm[latent[t]];
  std::vector<std::vector<int>> lat2 = {permuted};
  auto mapped = match_states(lat2, refs, 3, ls);
  for (int s = 0; s < 3; ++s) CHECK(mapped[perm[s]] == base[s]);
}

TEST_CASE("supervised bins option floors D") {
  LabelSet ab({Behaviour::NTW, Behaviour::ST});
  std::vector<Behaviour> labels = {Behaviour::NTW, Behaviour::ST};
  Dataset data = labeled_dataset({{0}, {1}}, labels, ab, 1);
  SupervisedOptions opts;
  opts.bins = 10;  // data only reaches bin 2
  HmmModel model = fit_supervised(data, opts);
  CHECK(model.D == 10);
  model.validate();
}
