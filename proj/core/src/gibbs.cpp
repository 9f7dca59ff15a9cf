#include "walker/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace walker {

void GibbsHyper::validate() const {
  if (!(alpha0 > 0) || !(beta0 > 0) || !(gamma0 > 0)) {
    throw DataError("Gibbs pseudocounts must be strictly positive");
  }
}

GibbsObs gibbs_obs(const Dataset& data, int n, int D) {
  GibbsObs obs;
  for (const auto& seq : data.sequences) {
    obs.push_back(detail::obs_matrix(seq, n, D));
  }
  return obs;
}

namespace {

// Sufficient statistics owned by position t: its initial-or-incoming
// transition and its emissions. Summing over all t counts every transition
// exactly once.
void add_stats(GibbsState& st, const GibbsObs& data, int seq, int t,
               double sign) {
  const auto& b_seq = st.assignments[seq];
  const auto& x = data[seq];
  const int b = b_seq[t];
  if (t == 0) {
    st.gamma[b] += sign;
  } else {
    st.alpha[b_seq[t - 1]][b] += sign;
  }
  for (int k = 0; k < st.n; ++k) st.beta[b][k][x[t][k]] += sign;
}

// Everything that depends on the value of b_t: the stats above plus the
// outgoing transition, which position t+1 owns. Used to blank out a site
// before resampling it.
void add_site(GibbsState& st, const GibbsObs& data, int seq, int t,
              double sign) {
  add_stats(st, data, seq, t, sign);
  const auto& b_seq = st.assignments[seq];
  if (t + 1 < static_cast<int>(b_seq.size())) {
    st.alpha[b_seq[t]][b_seq[t + 1]] += sign;
  }
}

// Log Dirichlet-multinomial block probability with a symmetric prior:
// log [Gamma(K p) / Gamma(K p + N)] + sum_i log [Gamma(c_i) / Gamma(p)]
// where counts c_i already include the prior value p.
double block_term(std::span<const double> counts, double prior) {
  const double K = static_cast<double>(counts.size());
  double sum = 0, term = 0;
  for (double c : counts) {
    term += std::lgamma(c) - std::lgamma(prior);
    sum += c;
  }
  return std::lgamma(K * prior) - std::lgamma(sum) + term;
}

}  // namespace

void remove_site(GibbsState& state, const GibbsObs& data, int seq, int t) {
  add_site(state, data, seq, t, -1.0);
}

void restore_site(GibbsState& state, const GibbsObs& data, int seq, int t) {
  add_site(state, data, seq, t, 1.0);
}

GibbsState init_gibbs(const GibbsObs& data, int num_states, int n, int D,
                      const GibbsHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  if (num_states < 1) throw DataError("init_gibbs: num_states must be >= 1");
  GibbsState st;
  st.m = num_states;
  st.n = n;
  st.D = D;
  st.hyper = hyper;
  st.rng.seed(seed);
  st.alpha.assign(st.m, std::vector<double>(st.m, hyper.alpha0));
  st.beta.assign(st.m, std::vector<std::vector<double>>(
                           n, std::vector<double>(D, hyper.beta0)));
  st.gamma.assign(st.m, hyper.gamma0);

  std::uniform_int_distribution<int> uniform_state(0, st.m - 1);
  for (const auto& x : data) {
    std::vector<int> b_seq(x.size());
    for (int& b : b_seq) b = uniform_state(st.rng);
    st.assignments.push_back(std::move(b_seq));
  }
  for (size_t i = 0; i < data.size(); ++i) {
    for (size_t t = 0; t < data[i].size(); ++t) {
      add_stats(st, data, static_cast<int>(i), static_cast<int>(t), 1.0);
    }
  }
  return st;
}

double gibbs_log_marginal(const GibbsState& state) {
  double total = block_term(state.gamma, state.hyper.gamma0);
  for (int b = 0; b < state.m; ++b) {
    total += block_term(state.alpha[b], state.hyper.alpha0);
    for (int k = 0; k < state.n; ++k) {
      total += block_term(state.beta[b][k], state.hyper.beta0);
    }
  }
  return total;
}

double gibbs_log_marginal(const GibbsObs& data,
                          const std::vector<std::vector<int>>& assignments,
                          int num_states, int n, int D,
                          const GibbsHyper& hyper) {
  GibbsState st = init_gibbs(data, num_states, n, D, hyper, 0);
  // Replace the random initial assignment with the requested one.
  for (size_t i = 0; i < data.size(); ++i) {
    for (size_t t = 0; t < data[i].size(); ++t) {
      add_stats(st, data, static_cast<int>(i), static_cast<int>(t), -1.0);
    }
  }
  st.assignments = assignments;
  for (size_t i = 0; i < data.size(); ++i) {
    for (size_t t = 0; t < data[i].size(); ++t) {
      add_stats(st, data, static_cast<int>(i), static_cast<int>(t), 1.0);
    }
  }
  return gibbs_log_marginal(st);
}

std::vector<double> gibbs_conditional(const GibbsState& state,
                                      const GibbsObs& data, int seq, int t) {
  const auto& b_seq = state.assignments[seq];
  const auto& x = data[seq];
  const int T = static_cast<int>(b_seq.size());
  const int m = state.m;

  std::vector<double> p(m);
  double norm = 0;
  for (int b = 0; b < m; ++b) {
    double w;
    if (t == 0) {
      double gamma_total =
          std::accumulate(state.gamma.begin(), state.gamma.end(), 0.0);
      w = state.gamma[b] / gamma_total;
    } else {
      const int prev = b_seq[t - 1];
      double row_total =
          std::accumulate(state.alpha[prev].begin(), state.alpha[prev].end(), 0.0);
      w = state.alpha[prev][b] / row_total;
    }
    if (t + 1 < T) {
      const int next = b_seq[t + 1];
      // Adding the (prev -> b) transition first shifts row b when prev == b.
      const bool self_in = t > 0 && b_seq[t - 1] == b;
      double row_total =
          std::accumulate(state.alpha[b].begin(), state.alpha[b].end(), 0.0) +
          (self_in ? 1.0 : 0.0);
      double num = state.alpha[b][next] + (self_in && next == b ? 1.0 : 0.0);
      w *= num / row_total;
    }
    for (int k = 0; k < state.n; ++k) {
      double col_total = std::accumulate(state.beta[b][k].begin(),
                                         state.beta[b][k].end(), 0.0);
      w *= state.beta[b][k][x[t][k]] / col_total;
    }
    p[b] = w;
    norm += w;
  }
  for (double& v : p) v /= norm;
  return p;
}

void gibbs_sweep(GibbsState& state, const GibbsObs& data) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (size_t i = 0; i < data.size(); ++i) {
    const int T = static_cast<int>(data[i].size());
    for (int t = 0; t < T; ++t) {
      remove_site(state, data, static_cast<int>(i), t);
      std::vector<double> p =
          gibbs_conditional(state, data, static_cast<int>(i), t);
      double u = unit(state.rng);
      int b = state.m - 1;
      double acc = 0;
      for (int c = 0; c < state.m; ++c) {
        acc += p[c];
        if (u < acc) {
          b = c;
          break;
        }
      }
      state.assignments[i][t] = b;
      restore_site(state, data, static_cast<int>(i), t);
    }
  }
}

void check_gibbs_counts(const GibbsState& state, const GibbsObs& data) {
  GibbsState fresh = init_gibbs(data, state.m, state.n, state.D, state.hyper, 0);
  for (size_t i = 0; i < data.size(); ++i) {
    for (size_t t = 0; t < data[i].size(); ++t) {
      add_stats(fresh, data, static_cast<int>(i), static_cast<int>(t), -1.0);
    }
  }
  fresh.assignments = state.assignments;
  for (size_t i = 0; i < data.size(); ++i) {
    for (size_t t = 0; t < data[i].size(); ++t) {
      add_stats(fresh, data, static_cast<int>(i), static_cast<int>(t), 1.0);
    }
  }
  auto close = [](double a, double b) { return std::abs(a - b) < 1e-9; };
  for (int b = 0; b < state.m; ++b) {
    if (!close(state.gamma[b], fresh.gamma[b])) {
      throw NumericError("Gibbs initial counts out of sync");
    }
    for (int b2 = 0; b2 < state.m; ++b2) {
      if (!close(state.alpha[b][b2], fresh.alpha[b][b2])) {
        throw NumericError("Gibbs transition counts out of sync");
      }
    }
    for (int k = 0; k < state.n; ++k) {
      for (int s = 0; s < state.D; ++s) {
        if (!close(state.beta[b][k][s], fresh.beta[b][k][s])) {
          throw NumericError("Gibbs emission counts out of sync");
        }
      }
    }
  }
}

HmmModel extract_gibbs_model(const GibbsState& state) {
  HmmModel model;
  model.m = state.m;
  model.n = state.n;
  model.D = state.D;
  double gamma_total =
      std::accumulate(state.gamma.begin(), state.gamma.end(), 0.0);
  for (int b = 0; b < state.m; ++b) {
    model.pi.push_back(state.gamma[b] / gamma_total);
    double row_total =
        std::accumulate(state.alpha[b].begin(), state.alpha[b].end(), 0.0);
    std::vector<double> row;
    for (int b2 = 0; b2 < state.m; ++b2) {
      row.push_back(state.alpha[b][b2] / row_total);
    }
    model.theta.push_back(std::move(row));
    model.phi.emplace_back();
    for (int k = 0; k < state.n; ++k) {
      double col_total = std::accumulate(state.beta[b][k].begin(),
                                         state.beta[b][k].end(), 0.0);
      std::vector<double> col;
      for (int s = 0; s < state.D; ++s) {
        col.push_back(state.beta[b][k][s] / col_total);
      }
      model.phi[b].push_back(std::move(col));
    }
    model.state_names.push_back(std::to_string(b));
  }
  model.validate();
  return model;
}

GibbsFitResult fit_gibbs(const Dataset& data, const GibbsOptions& options) {
  if (data.sequences.empty()) throw DataError("fit_gibbs: empty dataset");
  if (options.sweeps <= options.burn_in || options.burn_in < 0) {
    throw DataError("fit_gibbs: need sweeps > burn_in >= 0");
  }
  const int n = data.sequences.front().width();
  int D = options.bins;
  for (const auto& seq : data.sequences) {
    if (!seq.is_discretized()) throw DataError("fit_gibbs: data not discretized");
    for (const auto& row : seq.discretized) {
      for (int s : row) D = std::max(D, s);
    }
  }
  GibbsObs obs = gibbs_obs(data, n, D);
  GibbsState state = init_gibbs(obs, options.num_states, n, D, options.hyper,
                                options.seed);
  GibbsFitResult result;
  result.joint_trace.reserve(options.sweeps);
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    gibbs_sweep(state, obs);
    result.joint_trace.push_back(gibbs_log_marginal(state));
  }
  result.model = extract_gibbs_model(state);
  return result;
}

}  // namespace walker
