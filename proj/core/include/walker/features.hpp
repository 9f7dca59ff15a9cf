#pragma once

#include <array>
#include <span>
#include <vector>

#include "walker/types.hpp"

namespace walker {

enum class FeatureMode { NL, COP };

FeatureMode feature_mode_from_string(const std::string& s);
std::string to_string(FeatureMode mode);

// Calibration needed to turn raw channels into features.
struct Calibration {
  double ticks_per_meter = 1.0;
  // Per load channel (fl, fr, rl, rr) min/max, used only in NL mode.
  std::array<double, 4> load_min = {0, 0, 0, 0};
  std::array<double, 4> load_max = {65535, 65535, 65535, 65535};
};

// Load min/max observed in the given sequences, per load channel.
Calibration fit_load_range(std::span<const RawSequence> sequences,
                           double ticks_per_meter = 1.0);

// (value - min)/(max - min), clamped to [0, 1]. Throws NumericError if
// max == min.
double normalize_load(double value, double min, double max);

struct CopResult {
  double frontal = 0;   // (left - right) / total
  double sagittal = 0;  // (rear - front) / total
  double total = 0;
};

// Zero total load yields (0, 0) by convention, not an error.
CopResult compute_cop(double fl, double fr, double rl, double rr);

// Signed speed from encoder displacement; speed at the first tick is 0.
std::vector<double> compute_speed(std::span<const int> encoder,
                                  double ticks_per_meter);

// Equal-frequency discretizer. Edges are the (j/D)-quantiles of the pooled
// training values; application assigns bin 1 + #{edges < x}, so values equal
// to an edge fall in the lower bin.
class Discretizer {
 public:
  Discretizer() = default;
  Discretizer(int bins, std::vector<std::vector<double>> edges);

  int bins() const { return bins_; }
  int features() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::vector<double>>& edges() const { return edges_; }

  int apply_one(int feature, double x) const;  // bin in [1, bins]
  FeatureSequence apply(const FeatureSequence& seq) const;

 private:
  int bins_ = 0;
  std::vector<std::vector<double>> edges_;  // per feature, bins-1 sorted edges
};

Discretizer fit_discretizer(std::span<const FeatureSequence> training, int bins);

inline constexpr int kDefaultBins = 20;

// NL mode: accel x/y/z, speed, 4 normalized loads (8 features).
// COP mode: accel x/y/z, speed, frontal COP, sagittal COP, total load (7).
FeatureSequence build_features(const RawSequence& raw, FeatureMode mode,
                               const Calibration& calib);

}  // namespace walker
