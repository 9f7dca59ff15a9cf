#pragma once

#include <filesystem>
#include <variant>

#include "walker/crf.hpp"
#include "walker/hmm.hpp"

namespace walker {

// Versioned JSON with probabilities and weights serialized as shortest
// round-trip decimal strings, so load(save(m)) is bit-exact.
inline constexpr int kModelFormatVersion = 1;

void save_model(const HmmModel& model, const std::filesystem::path& path);
void save_model(const CrfModel& model, const std::filesystem::path& path);

HmmModel load_hmm_model(const std::filesystem::path& path);
CrfModel load_crf_model(const std::filesystem::path& path);

using AnyModel = std::variant<HmmModel, CrfModel>;
AnyModel load_model(const std::filesystem::path& path);

}  // namespace walker
