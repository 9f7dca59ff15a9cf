#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "walker/crf.hpp"
#include "walker/eval.hpp"
#include "walker/features.hpp"
#include "walker/gibbs.hpp"
#include "walker/hmm.hpp"

using namespace walker;

namespace {

std::vector<double> random_simplex(std::mt19937_64& rng, int k) {
  std::exponential_distribution<double> exp1(1.0);
  std::vector<double> out(k);
  double total = 0;
  for (double& v : out) {
    v = exp1(rng);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

HmmModel random_hmm(std::mt19937_64& rng, int m, int n, int D) {
  HmmModel model;
  model.m = m;
  model.n = n;
  model.D = D;
  model.pi = random_simplex(rng, m);
  for (int b = 0; b < m; ++b) {
    model.theta.push_back(random_simplex(rng, m));
    model.phi.emplace_back();
    for (int k = 0; k < n; ++k) {
      model.phi.back().push_back(random_simplex(rng, D));
    }
    model.state_names.push_back(std::to_string(b));
  }
  return model;
}

FeatureSequence random_obs(std::mt19937_64& rng, int T, int n, int D) {
  std::uniform_int_distribution<int> bin(1, D);
  FeatureSequence seq;
  for (int k = 0; k < n; ++k) {
    seq.feature_names.push_back("f" + std::to_string(k));
  }
  for (int t = 0; t < T; ++t) {
    std::vector<double> vals(n);
    std::vector<int> binned(n);
    for (int k = 0; k < n; ++k) {
      binned[k] = bin(rng);
      vals[k] = binned[k];
    }
    seq.values.push_back(std::move(vals));
    seq.discretized.push_back(std::move(binned));
  }
  return seq;
}

CrfModel random_crf(std::mt19937_64& rng, int m, int n) {
  CrfModel model;
  std::vector<Behaviour> members;
  for (int b = 0; b < m; ++b) members.push_back(static_cast<Behaviour>(b));
  model.label_set = LabelSet(std::move(members));
  model.bank = ThresholdBank(m, n);
  std::uniform_real_distribution<double> thr(-1, 1);
  for (int b = 0; b < m; ++b) {
    for (int b2 = 0; b2 < m; ++b2) {
      if (b2 == b) continue;
      for (int k = 0; k < n; ++k) model.bank.set(b, b2, k, thr(rng), true);
    }
  }
  std::normal_distribution<double> w(0, 1);
  model.weights.resize(2 * m * (m - 1) * n + 1);
  for (double& v : model.weights) v = w(rng);
  return model;
}

FeatureSequence random_real_obs(std::mt19937_64& rng, int T, int n) {
  std::uniform_real_distribution<double> val(-2, 2);
  FeatureSequence seq;
  for (int k = 0; k < n; ++k) {
    seq.feature_names.push_back("f" + std::to_string(k));
  }
  for (int t = 0; t < T; ++t) {
    std::vector<double> row(n);
    for (double& v : row) v = val(rng);
    seq.values.push_back(std::move(row));
  }
  return seq;
}

void BM_FilterPredict(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int T = static_cast<int>(state.range(0));
  HmmModel model = random_hmm(rng, 13, 7, 20);
  FeatureSequence obs = random_obs(rng, T, 7, 20);
  for (auto _ : state) {
    benchmark::DoNotOptimize(filter_predict(model, obs));
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_FilterPredict)->Arg(1000)->Arg(10000);

void BM_LogLikelihood(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int T = static_cast<int>(state.range(0));
  HmmModel model = random_hmm(rng, 13, 7, 20);
  FeatureSequence obs = random_obs(rng, T, 7, 20);
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_likelihood(model, obs));
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_LogLikelihood)->Arg(1000)->Arg(10000);

void BM_CrfGradient(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const int T = static_cast<int>(state.range(0));
  CrfModel model = random_crf(rng, 13, 7);
  Dataset data;
  data.label_set = model.label_set;
  FeatureSequence seq = random_real_obs(rng, T, 7);
  std::uniform_int_distribution<int> lab(0, 12);
  std::vector<Behaviour> labels(T);
  for (Behaviour& b : labels) b = model.label_set.at(lab(rng));
  seq.labels = std::move(labels);
  data.sequences.push_back(std::move(seq));
  for (auto _ : state) {
    benchmark::DoNotOptimize(nll_and_gradient(model.weights, model, data));
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_CrfGradient)->Arg(200)->Arg(1000);

void BM_ViterbiDecode(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const int T = static_cast<int>(state.range(0));
  CrfModel model = random_crf(rng, 13, 7);
  FeatureSequence obs = random_real_obs(rng, T, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(viterbi_decode(model, obs));
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_ViterbiDecode)->Arg(1000)->Arg(10000);

void BM_GibbsSweep(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const int T = static_cast<int>(state.range(0));
  GibbsObs data(1, std::vector<std::vector<int>>(T, std::vector<int>(7)));
  std::uniform_int_distribution<int> bin(0, 19);
  for (auto& row : data[0]) {
    for (int& v : row) v = bin(rng);
  }
  GibbsState gs = init_gibbs(data, 13, 7, 20, {}, 6);
  for (auto _ : state) {
    gibbs_sweep(gs, data);
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_GibbsSweep)->Arg(1000)->Arg(10000);

void BM_FitDiscretizer(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const int T = static_cast<int>(state.range(0));
  FeatureSequence seq = random_real_obs(rng, T, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_discretizer(std::span(&seq, 1), 20));
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_FitDiscretizer)->Arg(10000)->Arg(100000);

void BM_WindowedAccuracy(benchmark::State& state) {
  std::mt19937_64 rng(8);
  const int T = static_cast<int>(state.range(0));
  std::uniform_int_distribution<int> lab(0, 12);
  std::vector<Behaviour> pred(T), truth(T);
  for (int t = 0; t < T; ++t) {
    pred[t] = static_cast<Behaviour>(lab(rng));
    truth[t] = static_cast<Behaviour>(lab(rng));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(windowed_accuracy(pred, truth, 25));
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_WindowedAccuracy)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
