#include "walker/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace walker {

namespace {

void check_stochastic(std::span<const double> row, const std::string& what) {
  double sum = 0;
  for (double v : row) {
    if (v < 0 || !std::isfinite(v)) {
      throw DataError(what + ": negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DataError(what + ": row sums to " + std::to_string(sum) +
                    ", expected 1");
  }
}

// Pr(s_t | B_t = b), factorized over sensors.
double emission_prob(const HmmModel& model, int b,
                     std::span<const int> obs_row) {
  double p = 1.0;
  for (int k = 0; k < model.n; ++k) p *= model.phi[b][k][obs_row[k]];
  return p;
}

}  // namespace

void HmmModel::validate() const {
  if (m < 1 || n < 1 || D < 1) throw DataError("HmmModel: bad dimensions");
  if (static_cast<int>(pi.size()) != m ||
      static_cast<int>(theta.size()) != m ||
      static_cast<int>(phi.size()) != m ||
      static_cast<int>(state_names.size()) != m) {
    throw DataError("HmmModel: table sizes do not match m");
  }
  check_stochastic(pi, "pi");
  for (int b = 0; b < m; ++b) {
    if (static_cast<int>(theta[b].size()) != m) {
      throw DataError("HmmModel: theta row size mismatch");
    }
    check_stochastic(theta[b], "theta[" + std::to_string(b) + "]");
    if (static_cast<int>(phi[b].size()) != n) {
      throw DataError("HmmModel: phi sensor count mismatch");
    }
    for (int k = 0; k < n; ++k) {
      if (static_cast<int>(phi[b][k].size()) != D) {
        throw DataError("HmmModel: phi bin count mismatch");
      }
      check_stochastic(phi[b][k], "phi[" + std::to_string(b) + "][" +
                                      std::to_string(k) + "]");
    }
  }
}

std::vector<std::vector<double>> persistence_transitions(int m, double tau) {
  if (m < 1 || !(tau > 0)) {
    throw DataError("persistence_transitions: need m >= 1 and tau > 0");
  }
  const double denom = m + tau - 1;
  std::vector<std::vector<double>> theta(m, std::vector<double>(m, 1.0 / denom));
  for (int b = 0; b < m; ++b) theta[b][b] = tau / denom;
  return theta;
}

namespace detail {

std::vector<std::vector<int>> obs_matrix(const FeatureSequence& seq, int n,
                                         int D) {
  if (!seq.is_discretized()) {
    throw DataError("sequence is not discretized");
  }
  if (seq.width() != n) {
    throw DataError("sequence has " + std::to_string(seq.width()) +
                    " sensors, model expects " + std::to_string(n));
  }
  std::vector<std::vector<int>> obs(seq.length(), std::vector<int>(n));
  for (int t = 0; t < seq.length(); ++t) {
    for (int k = 0; k < n; ++k) {
      int s = seq.discretized[t][k];
      if (s < 1 || s > D) {
        throw DataError("bin index " + std::to_string(s) +
                        " outside [1, " + std::to_string(D) + "] at tick " +
                        std::to_string(t));
      }
      obs[t][k] = s - 1;
    }
  }
  return obs;
}

}  // namespace detail

HmmModel fit_supervised(const Dataset& data, const SupervisedOptions& options) {
  const int m = data.label_set.size();
  if (data.sequences.empty()) throw DataError("fit_supervised: no sequences");
  const int n = data.sequences.front().width();
  int D = options.bins;
  for (const auto& seq : data.sequences) {
    if (!seq.is_discretized() || !seq.labels) {
      throw DataError("fit_supervised: sequences must be labeled and discretized");
    }
    for (const auto& row : seq.discretized) {
      for (int s : row) D = std::max(D, s);
    }
  }
  const double eps = options.epsilon;

  std::vector<double> state_count(m, 0);       // occurrences of b at any t
  std::vector<double> prev_count(m, 0);        // occurrences of b at t-1
  std::vector<double> first_count(m, 0);       // occurrences of b at t=1
  std::vector<std::vector<double>> trans(m, std::vector<double>(m, 0));
  std::vector<std::vector<std::vector<double>>> emit(
      m, std::vector<std::vector<double>>(n, std::vector<double>(D, 0)));
  double total_ticks = 0;

  for (const auto& seq : data.sequences) {
    const auto& labels = *seq.labels;
    for (int t = 0; t < seq.length(); ++t) {
      int b = data.label_set.index_of(labels[t]);
      state_count[b] += 1;
      for (int k = 0; k < n; ++k) emit[b][k][seq.discretized[t][k] - 1] += 1;
      if (t > 0) {
        int prev = data.label_set.index_of(labels[t - 1]);
        prev_count[prev] += 1;
        trans[prev][b] += 1;
      } else {
        first_count[b] += 1;
      }
    }
    total_ticks += seq.length();
  }

  HmmModel model;
  model.m = m;
  model.n = n;
  model.D = D;
  model.state_names = data.label_set.names();

  if (options.prior == PriorModel::kUniform) {
    model.pi.assign(m, 1.0 / m);
  } else {
    const std::vector<double>& src =
        options.prior == PriorModel::kLearned ? state_count : first_count;
    double total = std::accumulate(src.begin(), src.end(), 0.0);
    model.pi.resize(m);
    for (int b = 0; b < m; ++b) {
      model.pi[b] = (src[b] + eps) / (total + m * eps);
    }
  }

  if (options.transitions == TransitionModel::kPersistence) {
    model.theta = persistence_transitions(m, options.tau);
  } else {
    model.theta.assign(m, std::vector<double>(m));
    for (int b = 0; b < m; ++b) {
      if (prev_count[b] == 0 && eps == 0) {
        // Seen only at sequence ends: no outgoing evidence, keep it uniform.
        model.theta[b].assign(m, 1.0 / m);
        continue;
      }
      for (int b2 = 0; b2 < m; ++b2) {
        model.theta[b][b2] = (trans[b][b2] + eps) / (prev_count[b] + m * eps);
      }
    }
  }

  model.phi.assign(m, std::vector<std::vector<double>>(
                          n, std::vector<double>(D)));
  for (int b = 0; b < m; ++b) {
    if (state_count[b] == 0 && eps == 0) {
      throw DataError("fit_supervised: behaviour " + model.state_names[b] +
                      " absent from training data and epsilon is 0");
    }
    for (int k = 0; k < n; ++k) {
      for (int s = 0; s < D; ++s) {
        model.phi[b][k][s] = (emit[b][k][s] + eps) / (state_count[b] + D * eps);
      }
    }
  }
  model.validate();
  return model;
}

FilterResult filter_predict(const HmmModel& model, const FeatureSequence& obs) {
  model.validate();
  auto x = detail::obs_matrix(obs, model.n, model.D);
  const int T = static_cast<int>(x.size());
  const int m = model.m;

  FilterResult result;
  result.states.resize(T);
  result.marginals.assign(T, std::vector<double>(m));

  std::vector<double> alpha(m), next(m);
  for (int t = 0; t < T; ++t) {
    double norm = 0;
    for (int b = 0; b < m; ++b) {
      double prior;
      if (t == 0) {
        prior = model.pi[b];
      } else {
        prior = 0;
        for (int b0 = 0; b0 < m; ++b0) prior += alpha[b0] * model.theta[b0][b];
      }
      next[b] = prior * emission_prob(model, b, x[t]);
      norm += next[b];
    }
    if (norm <= 0 || !std::isfinite(norm)) {
      throw NumericError("filter_predict: zero likelihood at tick " +
                         std::to_string(t));
    }
    int best = 0;
    for (int b = 0; b < m; ++b) {
      alpha[b] = next[b] / norm;
      result.marginals[t][b] = alpha[b];
      if (alpha[b] > alpha[best]) best = b;
    }
    result.states[t] = best;
  }
  return result;
}

double log_likelihood(const HmmModel& model, const FeatureSequence& obs) {
  model.validate();
  auto x = detail::obs_matrix(obs, model.n, model.D);
  const int T = static_cast<int>(x.size());
  const int m = model.m;

  double ll = 0;
  std::vector<double> alpha(m), next(m);
  for (int t = 0; t < T; ++t) {
    double norm = 0;
    for (int b = 0; b < m; ++b) {
      double prior;
      if (t == 0) {
        prior = model.pi[b];
      } else {
        prior = 0;
        for (int b0 = 0; b0 < m; ++b0) prior += alpha[b0] * model.theta[b0][b];
      }
      next[b] = prior * emission_prob(model, b, x[t]);
      norm += next[b];
    }
    if (norm <= 0 || !std::isfinite(norm)) {
      throw NumericError("log_likelihood: zero likelihood at tick " +
                         std::to_string(t));
    }
    for (int b = 0; b < m; ++b) alpha[b] = next[b] / norm;
    ll += std::log(norm);
  }
  return ll;
}

double log_likelihood(const HmmModel& model,
                      std::span<const FeatureSequence> data) {
  double ll = 0;
  for (const auto& seq : data) ll += log_likelihood(model, seq);
  return ll;
}

namespace {

struct EmStats {
  std::vector<double> initial;                      // m
  std::vector<std::vector<double>> trans;           // m x m
  std::vector<std::vector<std::vector<double>>> emit;  // m x n x D
};

// One forward-backward pass; accumulates expected counts, returns log-lik.
double accumulate_expectations(const HmmModel& model,
                               const std::vector<std::vector<int>>& x,
                               EmStats& stats) {
  const int T = static_cast<int>(x.size());
  const int m = model.m;

  std::vector<std::vector<double>> alpha(T, std::vector<double>(m));
  std::vector<std::vector<double>> beta(T, std::vector<double>(m));
  std::vector<std::vector<double>> e(T, std::vector<double>(m));
  std::vector<double> scale(T);

  double ll = 0;
  for (int t = 0; t < T; ++t) {
    double norm = 0;
    for (int b = 0; b < m; ++b) {
      e[t][b] = emission_prob(model, b, x[t]);
      double prior;
      if (t == 0) {
        prior = model.pi[b];
      } else {
        prior = 0;
        for (int b0 = 0; b0 < m; ++b0) prior += alpha[t - 1][b0] * model.theta[b0][b];
      }
      alpha[t][b] = prior * e[t][b];
      norm += alpha[t][b];
    }
    if (norm <= 0 || !std::isfinite(norm)) {
      throw NumericError("EM: zero likelihood at tick " + std::to_string(t));
    }
    for (int b = 0; b < m; ++b) alpha[t][b] /= norm;
    scale[t] = norm;
    ll += std::log(norm);
  }

  for (int b = 0; b < m; ++b) beta[T - 1][b] = 1.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int b = 0; b < m; ++b) {
      double sum = 0;
      for (int b2 = 0; b2 < m; ++b2) {
        sum += model.theta[b][b2] * e[t + 1][b2] * beta[t + 1][b2];
      }
      beta[t][b] = sum / scale[t + 1];
    }
  }

  for (int t = 0; t < T; ++t) {
    std::vector<double> gamma(m);
    double norm = 0;
    for (int b = 0; b < m; ++b) {
      gamma[b] = alpha[t][b] * beta[t][b];
      norm += gamma[b];
    }
    for (int b = 0; b < m; ++b) {
      gamma[b] /= norm;
      for (int k = 0; k < model.n; ++k) stats.emit[b][k][x[t][k]] += gamma[b];
      if (t == 0) stats.initial[b] += gamma[b];
    }
  }

  for (int t = 0; t + 1 < T; ++t) {
    double norm = 0;
    std::vector<std::vector<double>> xi(m, std::vector<double>(m));
    for (int b = 0; b < m; ++b) {
      for (int b2 = 0; b2 < m; ++b2) {
        xi[b][b2] = alpha[t][b] * model.theta[b][b2] * e[t + 1][b2] *
                    beta[t + 1][b2];
        norm += xi[b][b2];
      }
    }
    for (int b = 0; b < m; ++b) {
      for (int b2 = 0; b2 < m; ++b2) stats.trans[b][b2] += xi[b][b2] / norm;
    }
  }
  return ll;
}

HmmModel random_model(int m, int n, int D, std::mt19937_64& rng) {
  // Symmetric Dirichlet(1) rows via normalized Exp(1) draws.
  std::exponential_distribution<double> exp1(1.0);
  auto draw_row = [&](int len) {
    std::vector<double> row(len);
    double sum = 0;
    for (double& v : row) {
      v = exp1(rng) + 1e-12;
      sum += v;
    }
    for (double& v : row) v /= sum;
    return row;
  };
  HmmModel model;
  model.m = m;
  model.n = n;
  model.D = D;
  model.pi = draw_row(m);
  for (int b = 0; b < m; ++b) {
    model.theta.push_back(draw_row(m));
    model.phi.emplace_back();
    for (int k = 0; k < n; ++k) model.phi[b].push_back(draw_row(D));
    model.state_names.push_back(std::to_string(b));
  }
  return model;
}

}  // namespace

EmResult fit_em(const Dataset& data, const EmOptions& options) {
  if (data.sequences.empty()) throw DataError("fit_em: empty dataset");
  if (options.num_states < 1) throw DataError("fit_em: num_states must be >= 1");
  if (options.restarts < 1) throw DataError("fit_em: restarts must be >= 1");

  const int m = options.num_states;
  const int n = data.sequences.front().width();
  int D = options.bins;
  std::vector<std::vector<std::vector<int>>> xs;
  for (const auto& seq : data.sequences) {
    if (!seq.is_discretized()) throw DataError("fit_em: data not discretized");
    if (seq.width() != n) throw DataError("fit_em: mixed sensor counts");
    for (const auto& row : seq.discretized) {
      for (int s : row) D = std::max(D, s);
    }
  }
  for (const auto& seq : data.sequences) {
    xs.push_back(detail::obs_matrix(seq, n, D));
  }

  EmResult best;
  bool have_best = false;
  for (int r = 0; r < options.restarts; ++r) {
    std::seed_seq seed{options.seed, static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seed);
    HmmModel model = random_model(m, n, D, rng);

    std::vector<double> trace;
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < options.max_iters; ++iter) {
      EmStats stats;
      stats.initial.assign(m, 0);
      stats.trans.assign(m, std::vector<double>(m, 0));
      stats.emit.assign(m, std::vector<std::vector<double>>(
                               n, std::vector<double>(D, 0)));
      double ll = 0;
      for (const auto& x : xs) ll += accumulate_expectations(model, x, stats);
      trace.push_back(ll);

      double init_total =
          std::accumulate(stats.initial.begin(), stats.initial.end(), 0.0);
      for (int b = 0; b < m; ++b) model.pi[b] = stats.initial[b] / init_total;
      for (int b = 0; b < m; ++b) {
        double row_total =
            std::accumulate(stats.trans[b].begin(), stats.trans[b].end(), 0.0);
        if (row_total > 0) {
          for (int b2 = 0; b2 < m; ++b2) {
            model.theta[b][b2] = stats.trans[b][b2] / row_total;
          }
        }
        for (int k = 0; k < n; ++k) {
          double emit_total = std::accumulate(stats.emit[b][k].begin(),
                                              stats.emit[b][k].end(), 0.0);
          if (emit_total > 0) {
            for (int s = 0; s < D; ++s) {
              model.phi[b][k][s] = stats.emit[b][k][s] / emit_total;
            }
          }
        }
      }

      if (iter > 0 && ll - prev_ll < options.tol) break;
      prev_ll = ll;
    }

    double final_ll = 0;
    std::span<const FeatureSequence> span(data.sequences);
    final_ll = log_likelihood(model, span);
    if (!have_best || final_ll > best.log_likelihood) {
      best.model = std::move(model);
      best.log_likelihood = final_ll;
      best.iteration_log_likelihoods = std::move(trace);
      have_best = true;
    }
  }
  best.model.validate();
  return best;
}

std::vector<Behaviour> match_states(
    std::span<const std::vector<int>> latent_predictions,
    std::span<const std::vector<Behaviour>> reference_labels, int num_states,
    const LabelSet& label_set) {
  if (latent_predictions.size() != reference_labels.size()) {
    throw DataError("match_states: sequence count mismatch");
  }
  const int m = label_set.size();
  std::vector<std::vector<long>> cooc(num_states, std::vector<long>(m, 0));
  std::vector<long> global(m, 0);
  for (size_t i = 0; i < latent_predictions.size(); ++i) {
    const auto& latent = latent_predictions[i];
    const auto& ref = reference_labels[i];
    if (latent.size() != ref.size()) {
      throw DataError("match_states: sequence length mismatch");
    }
    for (size_t t = 0; t < latent.size(); ++t) {
      int s = latent[t];
      if (s < 0 || s >= num_states) {
        throw DataError("match_states: latent state out of range");
      }
      int b = label_set.index_of(ref[t]);
      cooc[s][b] += 1;
      global[b] += 1;
    }
  }
  int global_best = 0;
  for (int b = 0; b < m; ++b) {
    if (global[b] > global[global_best]) global_best = b;
  }
  std::vector<Behaviour> mapping(num_states);
  for (int s = 0; s < num_states; ++s) {
    long total = std::accumulate(cooc[s].begin(), cooc[s].end(), 0L);
    int best = global_best;
    if (total > 0) {
      best = 0;
      for (int b = 0; b < m; ++b) {
        if (cooc[s][b] > cooc[s][best]) best = b;  // ties keep earlier member
      }
    }
    mapping[s] = label_set.at(best);
  }
  return mapping;
}

}  // namespace walker
