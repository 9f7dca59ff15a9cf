#include "walker/types.hpp"

#include <algorithm>
#include <array>

namespace walker {

namespace {

const std::array<std::string, kBehaviourUniverseSize> kCodes = {
    "NTW", "ST",  "WF", "TL", "TR",  "WB",  "TRS",
    "GUR", "GDR", "SW", "RT", "GUC", "GDC"};

}  // namespace

const std::string& to_string(Behaviour b) {
  return kCodes.at(static_cast<size_t>(b));
}

Behaviour behaviour_from_string(const std::string& code) {
  for (int i = 0; i < kBehaviourUniverseSize; ++i) {
    if (kCodes[i] == code) return static_cast<Behaviour>(i);
  }
  throw DataError("unknown behaviour label: '" + code + "'");
}

LabelSet::LabelSet(std::vector<Behaviour> members) : members_(std::move(members)) {
  if (members_.size() < 2) throw DataError("label set needs at least 2 members");
  std::fill(std::begin(index_), std::end(index_), -1);
  for (size_t i = 0; i < members_.size(); ++i) {
    int& slot = index_[static_cast<int>(members_[i])];
    if (slot >= 0) {
      throw DataError("duplicate label in label set: " + to_string(members_[i]));
    }
    slot = static_cast<int>(i);
  }
}

LabelSet LabelSet::experiment1() {
  return LabelSet({Behaviour::NTW, Behaviour::ST, Behaviour::WF, Behaviour::TL,
                   Behaviour::TR, Behaviour::WB, Behaviour::TRS});
}

LabelSet LabelSet::full() {
  std::vector<Behaviour> all;
  for (int i = 0; i < kBehaviourUniverseSize; ++i) {
    all.push_back(static_cast<Behaviour>(i));
  }
  return LabelSet(std::move(all));
}

int LabelSet::index_of(Behaviour b) const {
  int i = index_[static_cast<int>(b)];
  if (i < 0) throw DataError("label " + to_string(b) + " not in label set");
  return i;
}

std::vector<std::string> LabelSet::names() const {
  std::vector<std::string> out;
  out.reserve(members_.size());
  for (Behaviour b : members_) out.push_back(to_string(b));
  return out;
}

void RawSequence::validate() const {
  if (frames.empty()) throw DataError("empty sequence");
  const size_t n = frames.front().channels.size();
  for (size_t t = 0; t < frames.size(); ++t) {
    const SensorFrame& f = frames[t];
    if (t > 0 && f.tick != frames[t - 1].tick + 1) {
      throw DataError("ticks not strictly increasing by 1 at index " +
                      std::to_string(t));
    }
    if (f.channels.size() != n) {
      throw DataError("inconsistent channel count at tick " +
                      std::to_string(f.tick));
    }
    for (int v : f.channels) {
      if (v < 0 || v > kMaxSensorValue) {
        throw DataError("channel value " + std::to_string(v) +
                        " out of range [0, 65535] at tick " +
                        std::to_string(f.tick));
      }
    }
  }
  if (labels && labels->size() != frames.size()) {
    throw DataError("label count " + std::to_string(labels->size()) +
                    " does not match frame count " +
                    std::to_string(frames.size()));
  }
}

void FeatureSequence::validate() const {
  for (const auto& row : values) {
    if (row.size() != feature_names.size()) {
      throw DataError("feature row width does not match feature_names");
    }
  }
  if (!discretized.empty() && discretized.size() != values.size()) {
    throw DataError("discretized length does not match values length");
  }
  for (const auto& row : discretized) {
    if (row.size() != feature_names.size()) {
      throw DataError("discretized row width does not match feature_names");
    }
  }
  if (labels && labels->size() != values.size()) {
    throw DataError("label count does not match feature row count");
  }
}

}  // namespace walker
