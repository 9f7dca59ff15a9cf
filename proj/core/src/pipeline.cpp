#include "walker/pipeline.hpp"

#include <algorithm>

namespace walker {

ModelFamily model_family_from_string(const std::string& s) {
  if (s == "hmm-ml") return ModelFamily::kHmmMl;
  if (s == "hmm-em") return ModelFamily::kHmmEm;
  if (s == "hmm-gibbs") return ModelFamily::kHmmGibbs;
  if (s == "crf") return ModelFamily::kCrf;
  throw DataError("unknown model family: '" + s + "'");
}

std::string to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::kHmmMl: return "hmm-ml";
    case ModelFamily::kHmmEm: return "hmm-em";
    case ModelFamily::kHmmGibbs: return "hmm-gibbs";
    case ModelFamily::kCrf: return "crf";
  }
  throw DataError("bad model family");
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "exp1" || s == "EXP1") return Protocol::kExp1;
  if (s == "exp2" || s == "EXP2") return Protocol::kExp2;
  throw DataError("unknown protocol: '" + s + "'");
}

std::map<std::string, Calibration> participant_calibrations(
    std::span<const RawSequence> data, const RunConfig& config) {
  std::map<std::string, std::vector<RawSequence>> grouped;
  for (const RawSequence& seq : data) {
    grouped[seq.participant_id].push_back(seq);
  }
  std::map<std::string, Calibration> out;
  for (const auto& [id, sequences] : grouped) {
    out[id] = fit_load_range(sequences, config.ticks_per_meter);
  }
  return out;
}

std::vector<Behaviour> TrainedPredictor::predict(
    const FeatureSequence& features) const {
  if (config.family == ModelFamily::kCrf) {
    return viterbi_decode(crf, features);
  }
  FeatureSequence disc =
      features.is_discretized() ? features : discretizer.apply(features);
  FilterResult filtered = filter_predict(hmm, disc);
  std::vector<Behaviour> out(filtered.states.size());
  for (size_t t = 0; t < filtered.states.size(); ++t) {
    out[t] = state_to_behaviour.at(filtered.states[t]);
  }
  return out;
}

TrainedPredictor train_predictor(const Dataset& features,
                                 const RunConfig& config) {
  TrainedPredictor predictor;
  predictor.config = config;
  predictor.label_set = features.label_set;

  if (config.family == ModelFamily::kCrf) {
    CrfTrainConfig crf_config;
    crf_config.max_iters = config.crf_max_iters;
    crf_config.sigma2 = config.sigma2;
    predictor.crf = train_crf(features, crf_config);
    return predictor;
  }

  predictor.discretizer = fit_discretizer(features.sequences, config.bins);
  Dataset disc;
  disc.label_set = features.label_set;
  for (const auto& seq : features.sequences) {
    disc.sequences.push_back(predictor.discretizer.apply(seq));
  }

  if (config.family == ModelFamily::kHmmMl) {
    SupervisedOptions opts;
    opts.transitions = config.transitions;
    opts.tau = config.tau;
    opts.prior = config.prior;
    opts.epsilon = config.epsilon;
    opts.bins = config.bins;
    predictor.hmm = fit_supervised(disc, opts);
    predictor.hmm.discretizer_edges = predictor.discretizer.edges();
    predictor.state_to_behaviour = disc.label_set.members();
    return predictor;
  }

  const int num_states =
      config.num_states > 0 ? config.num_states : disc.label_set.size();
  if (config.family == ModelFamily::kHmmEm) {
    EmOptions opts;
    opts.num_states = num_states;
    opts.restarts = config.restarts;
    opts.max_iters = config.em_max_iters;
    opts.tol = config.em_tol;
    opts.seed = config.seed;
    opts.bins = config.bins;
    EmResult r = fit_em(disc, opts);
    predictor.hmm = std::move(r.model);
    predictor.trace = std::move(r.iteration_log_likelihoods);
  } else {
    GibbsOptions opts;
    opts.num_states = num_states;
    opts.hyper = config.hyper;
    opts.sweeps = config.sweeps;
    opts.burn_in = config.burn_in;
    opts.seed = config.seed;
    opts.bins = config.bins;
    GibbsFitResult r = fit_gibbs(disc, opts);
    predictor.hmm = std::move(r.model);
    predictor.trace = std::move(r.joint_trace);
  }
  predictor.hmm.discretizer_edges = predictor.discretizer.edges();

  // Latent states carry no labels; match them against the training labels.
  std::vector<std::vector<int>> latent;
  std::vector<std::vector<Behaviour>> refs;
  for (const auto& seq : disc.sequences) {
    if (!seq.labels) {
      throw DataError("unsupervised training data needs labels for state "
                      "matching");
    }
    latent.push_back(filter_predict(predictor.hmm, seq).states);
    refs.push_back(*seq.labels);
  }
  predictor.state_to_behaviour =
      match_states(latent, refs, num_states, disc.label_set);
  for (int s = 0; s < num_states; ++s) {
    predictor.hmm.state_names[s] = to_string(predictor.state_to_behaviour[s]);
  }
  return predictor;
}

namespace {

struct Fold {
  std::string participant;
  std::vector<size_t> train;
  std::vector<size_t> test;
};

std::vector<Fold> make_folds(std::span<const RawSequence> data,
                             Protocol protocol) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<size_t>> grouped;
  for (size_t i = 0; i < data.size(); ++i) {
    const std::string& id = data[i].participant_id;
    if (!grouped.count(id)) order.push_back(id);
    grouped[id].push_back(i);
  }
  if (order.size() < 2) {
    throw DataError("LOOCV needs at least 2 participants");
  }

  std::vector<Fold> folds;
  for (const std::string& id : order) {
    const auto& own = grouped[id];
    if (protocol == Protocol::kExp1 && own.size() < 2) {
      throw DataError("EXP1 protocol needs at least 2 runs per participant; " +
                      id + " has " + std::to_string(own.size()));
    }
    if (protocol == Protocol::kExp2) {
      Fold fold;
      fold.participant = id;
      fold.test = own;
      for (size_t i = 0; i < data.size(); ++i) {
        if (data[i].participant_id != id) fold.train.push_back(i);
      }
      folds.push_back(std::move(fold));
    } else {
      // One sub-fold per run; the participant's other runs stay in training.
      for (size_t held_out : own) {
        Fold fold;
        fold.participant = id;
        fold.test = {held_out};
        for (size_t i = 0; i < data.size(); ++i) {
          if (i != held_out) fold.train.push_back(i);
        }
        folds.push_back(std::move(fold));
      }
    }
  }
  return folds;
}

}  // namespace

CrossvalResult loocv(std::span<const RawSequence> data,
                     const LabelSet& label_set, const RunConfig& config) {
  for (const RawSequence& seq : data) {
    if (!seq.labels) throw DataError("loocv: all sequences must be labeled");
  }
  auto calibrations = participant_calibrations(data, config);
  std::vector<Fold> folds = make_folds(data, config.protocol);

  // window -> participant -> reports (sub-folds of one participant merge).
  std::map<std::string, std::vector<std::vector<EvalReport>>> per_participant;
  std::vector<std::string> participant_order;

  for (const Fold& fold : folds) {
    Dataset train;
    train.label_set = label_set;
    for (size_t i : fold.train) {
      train.sequences.push_back(
          build_features(data[i], config.mode,
                         calibrations.at(data[i].participant_id)));
    }
    TrainedPredictor predictor = train_predictor(train, config);

    std::vector<std::vector<EvalReport>> window_reports(
        config.window_grid.size());
    for (size_t i : fold.test) {
      FeatureSequence features = build_features(
          data[i], config.mode, calibrations.at(data[i].participant_id));
      std::vector<Behaviour> predicted = predictor.predict(features);
      for (size_t w = 0; w < config.window_grid.size(); ++w) {
        window_reports[w].push_back(evaluate(
            *data[i].labels, predicted, config.window_grid[w], label_set));
      }
    }
    if (!per_participant.count(fold.participant)) {
      participant_order.push_back(fold.participant);
      per_participant[fold.participant].resize(config.window_grid.size());
    }
    for (size_t w = 0; w < config.window_grid.size(); ++w) {
      auto& bucket = per_participant[fold.participant][w];
      bucket.insert(bucket.end(), window_reports[w].begin(),
                    window_reports[w].end());
    }
  }

  CrossvalResult result;
  std::vector<std::vector<EvalReport>> pooled_by_window(
      config.window_grid.size());
  for (const std::string& id : participant_order) {
    FoldReport fold_report;
    fold_report.participant = id;
    for (size_t w = 0; w < config.window_grid.size(); ++w) {
      fold_report.by_window.push_back(pool_reports(per_participant[id][w]));
      pooled_by_window[w].push_back(fold_report.by_window.back());
    }
    result.folds.push_back(std::move(fold_report));
  }
  for (size_t w = 0; w < config.window_grid.size(); ++w) {
    result.pooled.push_back(pool_reports(pooled_by_window[w]));
  }
  return result;
}

}  // namespace walker
