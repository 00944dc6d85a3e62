#pragma once

#include <filesystem>
#include <string_view>

#include "pseudolat/harness.hpp"

namespace pseudolat {

inline constexpr int kConfigVersion = 1;

// Strict JSON readers: a missing required field, an unknown field, a wrong type or an invalid value
// throws ConfigError whose field() names the offending path (e.g. "trajectory.radius").
ScenarioConfig parse_scenario(std::string_view json_text);
WaveformComparisonConfig parse_waveform_comparison(std::string_view json_text);

// read_text_file + parse; missing files throw IoError.
ScenarioConfig load_scenario(const std::filesystem::path& path);
WaveformComparisonConfig load_waveform_comparison(const std::filesystem::path& path);

}  // namespace pseudolat
