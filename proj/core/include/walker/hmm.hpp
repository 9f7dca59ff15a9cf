#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "walker/types.hpp"

namespace walker {

// Discrete-emission HMM. theta[b][b2] = Pr(B_t = b2 | B_{t-1} = b),
// phi[b][k][s] = Pr(S_t^k = s+1 | B_t = b) with bins 1..D stored 0-based.
struct HmmModel {
  int m = 0;  // states
  int n = 0;  // sensors
  int D = 0;  // bins per sensor
  std::vector<double> pi;                              // m
  std::vector<std::vector<double>> theta;              // m x m
  std::vector<std::vector<std::vector<double>>> phi;   // m x n x D
  std::vector<std::string> state_names;                // behaviour codes or indices
  // Equal-frequency bin edges fitted with the model, so a persisted model can
  // discretize raw features on its own. Empty when trained on pre-binned data.
  std::vector<std::vector<double>> discretizer_edges;  // n x (D-1), optional

  void validate() const;  // rows sum to 1 within 1e-9, entries >= 0
  bool operator==(const HmmModel&) const = default;
};

enum class TransitionModel { kLearned, kPersistence };
enum class PriorModel { kLearned, kLearnedInitial, kUniform };

struct SupervisedOptions {
  TransitionModel transitions = TransitionModel::kLearned;
  double tau = 4000;  // persistence ratio, used when kPersistence
  // kLearned uses the pooled marginal frequency of each behaviour;
  // kLearnedInitial uses first-tick frequencies instead.
  PriorModel prior = PriorModel::kLearned;
  double epsilon = 1;  // additive smoothing pseudocount
  int bins = 0;        // emission bin count D; 0 means largest bin seen
};

inline constexpr double kDefaultTau = 4000;

// Persistence row: tau/(m+tau-1) on the diagonal, 1/(m+tau-1) elsewhere.
std::vector<std::vector<double>> persistence_transitions(int m, double tau);

// Counting estimates from labeled, discretized sequences. State order follows
// the dataset's label set.
HmmModel fit_supervised(const Dataset& data, const SupervisedOptions& options);

struct FilterResult {
  std::vector<int> states;                     // argmax per tick
  std::vector<std::vector<double>> marginals;  // T x m filtered posteriors
};

// Online MAP filtering: marginals[t] is Pr(B_t | s_{1:t}), states[t] its
// argmax (first index wins ties).
FilterResult filter_predict(const HmmModel& model, const FeatureSequence& obs);

// log Pr(s_{1:T}) by the forward recursion.
double log_likelihood(const HmmModel& model, const FeatureSequence& obs);
double log_likelihood(const HmmModel& model,
                      std::span<const FeatureSequence> data);

struct EmOptions {
  int num_states = 1;
  int restarts = 20;
  int max_iters = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  int bins = 0;  // emission bin count D; 0 means largest bin seen
};

struct EmResult {
  HmmModel model;
  double log_likelihood = 0;
  std::vector<double> iteration_log_likelihoods;  // best restart's trace
};

EmResult fit_em(const Dataset& data, const EmOptions& options);

// Majority-co-occurrence mapping from latent state index to behaviour.
// Ties break toward the earlier label-set member; states never emitted map
// to the globally most frequent behaviour.
std::vector<Behaviour> match_states(
    std::span<const std::vector<int>> latent_predictions,
    std::span<const std::vector<Behaviour>> reference_labels, int num_states,
    const LabelSet& label_set);

// Internal helpers shared with the Gibbs sampler.
namespace detail {
// Observation rows as 0-based bin indices; throws if not discretized or bins
// out of range.
std::vector<std::vector<int>> obs_matrix(const FeatureSequence& seq, int n,
                                         int D);
}  // namespace detail

}  // namespace walker
