#include "walker/features.hpp"

#include <algorithm>
#include <cstdio>

namespace walker {

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "nl" || s == "NL") return FeatureMode::NL;
  if (s == "cop" || s == "COP") return FeatureMode::COP;
  throw DataError("unknown feature mode: '" + s + "'");
}

std::string to_string(FeatureMode mode) {
  return mode == FeatureMode::NL ? "nl" : "cop";
}

Calibration fit_load_range(std::span<const RawSequence> sequences,
                           double ticks_per_meter) {
  Calibration calib;
  calib.ticks_per_meter = ticks_per_meter;
  bool any = false;
  for (const RawSequence& seq : sequences) {
    for (const SensorFrame& f : seq.frames) {
      for (int i = 0; i < 4; ++i) {
        double v = f.channels.at(kLoadFL + i);
        if (!any) {
          calib.load_min[i] = v;
          calib.load_max[i] = v;
        } else {
          calib.load_min[i] = std::min(calib.load_min[i], v);
          calib.load_max[i] = std::max(calib.load_max[i], v);
        }
      }
      any = true;
    }
  }
  if (!any) throw DataError("fit_load_range: no frames");
  return calib;
}

double normalize_load(double value, double min, double max) {
  if (!(max > min)) {
    throw NumericError("normalize_load: degenerate range, max <= min");
  }
  return std::clamp((value - min) / (max - min), 0.0, 1.0);
}

CopResult compute_cop(double fl, double fr, double rl, double rr) {
  CopResult r;
  r.total = fl + fr + rl + rr;
  if (r.total == 0) return r;  // (0, 0) by convention
  r.frontal = ((fl + rl) - (fr + rr)) / r.total;
  r.sagittal = ((rl + rr) - (fl + fr)) / r.total;
  return r;
}

std::vector<double> compute_speed(std::span<const int> encoder,
                                  double ticks_per_meter) {
  if (encoder.empty()) throw DataError("compute_speed: empty sequence");
  if (!(ticks_per_meter > 0)) {
    throw DataError("compute_speed: ticks_per_meter must be positive");
  }
  std::vector<double> speed(encoder.size(), 0.0);
  for (size_t t = 1; t < encoder.size(); ++t) {
    speed[t] = (encoder[t] - encoder[t - 1]) / ticks_per_meter * kSampleRateHz;
  }
  return speed;
}

Discretizer::Discretizer(int bins, std::vector<std::vector<double>> edges)
    : bins_(bins), edges_(std::move(edges)) {
  if (bins_ < 2) throw DataError("discretizer needs at least 2 bins");
  for (const auto& e : edges_) {
    if (static_cast<int>(e.size()) != bins_ - 1 ||
        !std::is_sorted(e.begin(), e.end())) {
      throw DataError("discretizer edges must be bins-1 non-decreasing values");
    }
  }
}

int Discretizer::apply_one(int feature, double x) const {
  const auto& e = edges_.at(feature);
  // Values equal to an edge go to the lower bin.
  return 1 + static_cast<int>(std::lower_bound(e.begin(), e.end(), x) -
                              e.begin());
}

FeatureSequence Discretizer::apply(const FeatureSequence& seq) const {
  if (seq.width() != features()) {
    throw DataError("discretizer fitted on " + std::to_string(features()) +
                    " features, sequence has " + std::to_string(seq.width()));
  }
  FeatureSequence out = seq;
  out.discretized.assign(seq.length(), std::vector<int>(seq.width()));
  for (int t = 0; t < seq.length(); ++t) {
    for (int k = 0; k < seq.width(); ++k) {
      out.discretized[t][k] = apply_one(k, seq.values[t][k]);
    }
  }
  return out;
}

Discretizer fit_discretizer(std::span<const FeatureSequence> training,
                            int bins) {
  if (bins < 2) throw DataError("fit_discretizer: bins must be >= 2");
  if (training.empty()) throw DataError("fit_discretizer: no training data");
  const int n = training.front().width();
  for (const FeatureSequence& seq : training) {
    if (seq.width() != n) {
      throw DataError("fit_discretizer: mixed feature widths");
    }
  }

  std::vector<std::vector<double>> edges(n);
  for (int k = 0; k < n; ++k) {
    std::vector<double> pool;
    for (const FeatureSequence& seq : training) {
      for (int t = 0; t < seq.length(); ++t) pool.push_back(seq.values[t][k]);
    }
    if (pool.empty()) throw DataError("fit_discretizer: empty feature pool");
    std::sort(pool.begin(), pool.end());
    const size_t total = pool.size();
    auto& e = edges[k];
    e.reserve(bins - 1);
    for (int j = 1; j < bins; ++j) {
      size_t idx = (static_cast<size_t>(j) * total) / bins;
      if (idx == 0) idx = 1;
      e.push_back(pool[idx - 1]);
    }
    if (std::adjacent_find(e.begin(), e.end()) != e.end()) {
      std::fprintf(stderr,
                   "warning: feature %d has fewer distinct values than bins; "
                   "duplicate edges merge bins\n",
                   k);
    }
  }
  return Discretizer(bins, std::move(edges));
}

FeatureSequence build_features(const RawSequence& raw, FeatureMode mode,
                               const Calibration& calib) {
  raw.validate();
  if (raw.frames.front().channels.size() != kRawChannelCount) {
    throw DataError("build_features: expected canonical 8-channel layout");
  }
  const int T = raw.length();

  std::vector<int> encoder(T);
  for (int t = 0; t < T; ++t) encoder[t] = raw.frames[t].channels[kEncoder];
  std::vector<double> speed = compute_speed(encoder, calib.ticks_per_meter);

  FeatureSequence out;
  out.participant_id = raw.participant_id;
  out.labels = raw.labels;
  if (mode == FeatureMode::NL) {
    out.feature_names = {"accel_x", "accel_y", "accel_z", "speed",
                         "nl_fl",   "nl_fr",   "nl_rl",   "nl_rr"};
  } else {
    out.feature_names = {"accel_x",     "accel_y",      "accel_z", "speed",
                         "cop_frontal", "cop_sagittal", "total_load"};
  }
  out.values.reserve(T);
  for (int t = 0; t < T; ++t) {
    const auto& ch = raw.frames[t].channels;
    std::vector<double> row;
    row.reserve(out.feature_names.size());
    row.push_back(ch[kAccelX]);
    row.push_back(ch[kAccelY]);
    row.push_back(ch[kAccelZ]);
    row.push_back(speed[t]);
    if (mode == FeatureMode::NL) {
      for (int i = 0; i < 4; ++i) {
        row.push_back(normalize_load(ch[kLoadFL + i], calib.load_min[i],
                                     calib.load_max[i]));
      }
    } else {
      CopResult cop =
          compute_cop(ch[kLoadFL], ch[kLoadFR], ch[kLoadRL], ch[kLoadRR]);
      row.push_back(cop.frontal);
      row.push_back(cop.sagittal);
      row.push_back(cop.total);
    }
    out.values.push_back(std::move(row));
  }
  return out;
}

}  // namespace walker
