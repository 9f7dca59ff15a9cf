#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "walker/crf.hpp"
#include "walker/eval.hpp"
#include "walker/features.hpp"
#include "walker/gibbs.hpp"
#include "walker/hmm.hpp"
#include "walker/types.hpp"

namespace walker {

enum class ModelFamily { kHmmMl, kHmmEm, kHmmGibbs, kCrf };
enum class Protocol { kExp1, kExp2 };

ModelFamily model_family_from_string(const std::string& s);
std::string to_string(ModelFamily family);
Protocol protocol_from_string(const std::string& s);

// One bag of knobs for the whole experiment pipeline; defaults follow the
// canonical configuration (D=20, tau=4000, sigma2=1, 20 restarts, 100 CG
// iterations, window grid 0..50 step 5).
struct RunConfig {
  FeatureMode mode = FeatureMode::COP;
  int bins = kDefaultBins;
  double ticks_per_meter = 1.0;

  ModelFamily family = ModelFamily::kHmmMl;
  TransitionModel transitions = TransitionModel::kPersistence;
  PriorModel prior = PriorModel::kUniform;
  double tau = kDefaultTau;
  double epsilon = 1;

  int num_states = 0;  // latent states for em/gibbs; 0 means label count
  int restarts = 20;
  int em_max_iters = 200;
  double em_tol = 1e-6;
  int sweeps = 200;
  int burn_in = 100;
  GibbsHyper hyper;

  double sigma2 = 1;
  int crf_max_iters = 100;

  Protocol protocol = Protocol::kExp2;
  std::vector<int> window_grid = default_window_grid();
  std::uint64_t seed = 0;
};

// A model trained on one fold (or the full dataset), able to label a raw
// sequence end to end. state_to_behaviour carries the latent-state matching
// for unsupervised HMM families; for supervised families it is the identity
// over the label set.
struct TrainedPredictor {
  RunConfig config;
  LabelSet label_set;
  Discretizer discretizer;            // HMM families only
  HmmModel hmm;                       // HMM families only
  CrfModel crf;                       // CRF family only
  std::vector<Behaviour> state_to_behaviour;
  // Training diagnostics: per-iteration log likelihood for EM, per-sweep
  // log joint for Gibbs. Empty for the other families.
  std::vector<double> trace;

  std::vector<Behaviour> predict(const FeatureSequence& features) const;
};

// Per-participant load calibration from the participant's own raw data (the
// load range is a label-free per-person constant, like body weight).
std::map<std::string, Calibration> participant_calibrations(
    std::span<const RawSequence> data, const RunConfig& config);

TrainedPredictor train_predictor(const Dataset& features,
                                 const RunConfig& config);

struct FoldReport {
  std::string participant;
  std::vector<EvalReport> by_window;  // one per window-grid entry
};

struct CrossvalResult {
  std::vector<FoldReport> folds;
  std::vector<EvalReport> pooled;  // one per window-grid entry
};

// Leave-one-participant-out cross validation. kExp2 holds out all of a
// participant's sequences; kExp1 holds out one run at a time and keeps the
// participant's other runs in training. Discretizers and thresholds are
// refit on each fold's training data only.
CrossvalResult loocv(std::span<const RawSequence> data,
                     const LabelSet& label_set, const RunConfig& config);

}  // namespace walker
