#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace walker {

// Data-level problem (bad file, bad value, mismatched shapes). CLI maps this
// to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure (zero likelihood, degenerate range). CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The 13 activity labels.
enum class Behaviour : int {
  NTW,  // not touching the walker
  ST,   // stop / standing
  WF,   // walking forward
  TL,   // turn left
  TR,   // turn right
  WB,   // walking backwards
  TRS,  // transfers (sit<->stand)
  GUR,  // going up ramp
  GDR,  // going down ramp
  SW,   // sitting on walker
  RT,   // reaching task
  GUC,  // going up curb
  GDC,  // going down curb
};

inline constexpr int kBehaviourUniverseSize = 13;

const std::string& to_string(Behaviour b);
Behaviour behaviour_from_string(const std::string& code);  // throws DataError

// Ordered, duplicate-free subset of the label universe. Order is significant:
// it defines state indices and all tie-breaking rules.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<Behaviour> members);

  static LabelSet experiment1();  // the 7 labels of the first course
  static LabelSet full();         // all 13

  int size() const { return static_cast<int>(members_.size()); }
  Behaviour at(int i) const { return members_.at(i); }
  const std::vector<Behaviour>& members() const { return members_; }

  bool contains(Behaviour b) const { return index_[static_cast<int>(b)] >= 0; }
  int index_of(Behaviour b) const;  // throws DataError if absent

  std::vector<std::string> names() const;

  bool operator==(const LabelSet& other) const {
    return members_ == other.members_;
  }

 private:
  std::vector<Behaviour> members_;
  int index_[kBehaviourUniverseSize] = {};
};

inline constexpr int kRawChannelCount = 8;  // 3 accel, 4 loads, 1 encoder
inline constexpr int kMaxSensorValue = 65535;
inline constexpr double kSampleRateHz = 50.0;

// Raw channel order in the canonical layout.
enum RawChannel {
  kAccelX = 0,
  kAccelY = 1,
  kAccelZ = 2,
  kLoadFL = 3,
  kLoadFR = 4,
  kLoadRL = 5,
  kLoadRR = 6,
  kEncoder = 7,
};

struct SensorFrame {
  std::int64_t tick = 0;
  std::vector<int> channels;  // each in [0, 65535]
};

struct RawSequence {
  std::string participant_id;
  std::vector<SensorFrame> frames;
  std::optional<std::vector<Behaviour>> labels;  // per tick, same length

  int length() const { return static_cast<int>(frames.size()); }
  void validate() const;  // throws DataError on invariant violation
};

// Per-tick derived features, optionally discretized into bins 1..D.
struct FeatureSequence {
  std::string participant_id;
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> values;    // T x n
  std::vector<std::vector<int>> discretized;  // T x n, empty if not discretized
  std::optional<std::vector<Behaviour>> labels;

  int length() const { return static_cast<int>(values.size()); }
  int width() const { return static_cast<int>(feature_names.size()); }
  bool is_discretized() const { return !discretized.empty(); }
  void validate() const;
};

struct Dataset {
  LabelSet label_set;
  std::vector<FeatureSequence> sequences;
};

}  // namespace walker
