#pragma once

#include <span>
#include <string>
#include <vector>

#include "walker/types.hpp"

namespace walker {

// One threshold per ordered behaviour pair (b, b') with b != b' and feature k.
// FALLBACK entries hold the feature's global training mean.
class ThresholdBank {
 public:
  ThresholdBank() = default;
  ThresholdBank(int m, int n);

  int labels() const { return m_; }
  int features() const { return n_; }

  // Pair enumeration: for each b, the m-1 other labels in label-set order.
  int pair_index(int b, int b2) const;
  int entry_index(int b, int b2, int k) const;

  double threshold(int b, int b2, int k) const;
  bool relevant(int b, int b2, int k) const;
  void set(int b, int b2, int k, double threshold, bool relevant);

  const std::vector<double>& raw_thresholds() const { return thresholds_; }
  const std::vector<bool>& raw_relevance() const { return relevance_; }
  void set_raw(std::vector<double> thresholds, std::vector<bool> relevance);

  bool operator==(const ThresholdBank&) const = default;

 private:
  int m_ = 0;
  int n_ = 0;
  std::vector<double> thresholds_;  // m(m-1)n
  std::vector<bool> relevance_;
};

// Automated stand-in for manually chosen thresholds: midpoint of the two
// class-conditional medians, falling back to the feature's global mean when
// the class distributions overlap too much to discriminate.
ThresholdBank fit_thresholds(const Dataset& data,
                             double overlap_cutoff = 0.75);

// Weight layout: for each (pair, feature) triple an exceed and a not-exceed
// weight, then the scalar transition weight nu at the end.
struct CrfModel {
  LabelSet label_set;
  ThresholdBank bank;
  std::vector<double> weights;  // 2 m(m-1) n + 1
  double sigma2 = 1;

  int weight_index(int b, int b2, int k, bool exceed) const {
    return bank.entry_index(b, b2, k) * 2 + (exceed ? 0 : 1);
  }
  int nu_index() const { return static_cast<int>(weights.size()) - 1; }
  double nu() const { return weights.back(); }
  void validate() const;
};

// Active weight indices for observing obs_t under label b: one indicator per
// (b, b', k) with b' != b, exceed iff obs_t[k] > threshold (strict).
std::vector<int> feature_vector(std::span<const double> obs_t, int b,
                                const CrfModel& model);

struct NllResult {
  double value = 0;
  std::vector<double> gradient;
};

// Penalized negative log-likelihood over all labeled sequences, plus its
// gradient (expected minus empirical feature counts, plus weights/sigma2).
NllResult nll_and_gradient(std::span<const double> weights,
                           const CrfModel& model, const Dataset& data);

struct CrfTrainConfig {
  int max_iters = 100;
  double sigma2 = 1;
  double grad_tol = 1e-6;
  double overlap_cutoff = 0.75;
};

struct CrfTraceRow {
  int iteration;
  double objective;
  double gradient_norm;
};

CrfModel train_crf(const Dataset& data, const CrfTrainConfig& config,
                   std::vector<CrfTraceRow>* trace = nullptr);

// Max-sum decoding of Eq-style pairwise chain scores; ties break toward the
// earlier label-set member.
std::vector<Behaviour> viterbi_decode(const CrfModel& model,
                                      const FeatureSequence& obs);

// Per-tick unpenalized score of a full label sequence (used by tests).
double sequence_score(const CrfModel& model, const FeatureSequence& obs,
                      std::span<const int> labels);

}  // namespace walker
