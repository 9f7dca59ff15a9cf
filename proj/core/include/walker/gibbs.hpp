#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "walker/hmm.hpp"
#include "walker/types.hpp"

namespace walker {

// Dirichlet pseudocounts for transitions (alpha), emissions (beta) and the
// initial state (gamma).
struct GibbsHyper {
  double alpha0 = 1;
  double beta0 = 1;
  double gamma0 = 1;
  void validate() const;
};

// Observations as 0-based bin indices, one matrix per sequence.
using GibbsObs = std::vector<std::vector<std::vector<int>>>;

GibbsObs gibbs_obs(const Dataset& data, int n, int D);

// Assignment state plus running counts. Counts always include the
// pseudocounts, so they can be plugged into the marginal directly.
struct GibbsState {
  int m = 0;
  int n = 0;
  int D = 0;
  GibbsHyper hyper;
  std::vector<std::vector<int>> assignments;          // per sequence
  std::vector<std::vector<double>> alpha;             // m x m
  std::vector<std::vector<std::vector<double>>> beta; // m x n x D
  std::vector<double> gamma;                          // m
  std::mt19937_64 rng;
};

GibbsState init_gibbs(const GibbsObs& data, int num_states, int n, int D,
                      const GibbsHyper& hyper, std::uint64_t seed);

// log Pr(B, s): sum of log-Gamma Dirichlet-multinomial block probabilities
// over the initial, transition and emission counts.
double gibbs_log_marginal(const GibbsState& state);
double gibbs_log_marginal(const GibbsObs& data,
                          const std::vector<std::vector<int>>& assignments,
                          int num_states, int n, int D,
                          const GibbsHyper& hyper);

// Removes or restores position t's contributions to the running counts:
// its initial-or-incoming transition, its outgoing transition and its
// emissions.
void remove_site(GibbsState& state, const GibbsObs& data, int seq, int t);
void restore_site(GibbsState& state, const GibbsObs& data, int seq, int t);

// Exact single-site conditional for position t of sequence seq. The caller
// must have removed that position's contributions with remove_site first.
std::vector<double> gibbs_conditional(const GibbsState& state,
                                      const GibbsObs& data, int seq, int t);

// One systematic sweep over every position of every sequence.
void gibbs_sweep(GibbsState& state, const GibbsObs& data);

// Recomputes all counts from the assignments; throws if they disagree with
// the running counts.
void check_gibbs_counts(const GibbsState& state, const GibbsObs& data);

// Dirichlet posterior means given the current assignment.
HmmModel extract_gibbs_model(const GibbsState& state);

struct GibbsOptions {
  int num_states = 1;
  GibbsHyper hyper;
  int sweeps = 200;
  int burn_in = 100;
  std::uint64_t seed = 0;
  int bins = 0;  // 0 means largest bin seen
};

struct GibbsFitResult {
  HmmModel model;
  std::vector<double> joint_trace;  // log marginal after each sweep
};

GibbsFitResult fit_gibbs(const Dataset& data, const GibbsOptions& options);

}  // namespace walker
