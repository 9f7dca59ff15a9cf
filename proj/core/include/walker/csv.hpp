#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "walker/types.hpp"

namespace walker {

// Canonical raw layout: t,accel_x,accel_y,accel_z,load_fl,load_fr,load_rl,
// load_rr,encoder[,label]. One row per 20 ms tick, integer values only.
extern const std::vector<std::string> kRawChannelNames;

RawSequence load_raw_csv(const std::filesystem::path& path,
                         const LabelSet& label_set);
void save_raw_csv(const RawSequence& seq, const std::filesystem::path& path);

// Feature CSV: t,<feature names...>[,label]. Values are reals.
FeatureSequence load_feature_csv(const std::filesystem::path& path,
                                 const LabelSet& label_set);
void save_feature_csv(const FeatureSequence& seq,
                      const std::filesystem::path& path);

// Prediction CSV: t,label.
std::vector<Behaviour> load_label_csv(const std::filesystem::path& path,
                                      const LabelSet& label_set);
void save_label_csv(const std::vector<Behaviour>& labels,
                    const std::filesystem::path& path);

// Writes via a temp file in the same directory, then renames into place.
void atomic_write(const std::filesystem::path& path, const std::string& body);

}  // namespace walker
