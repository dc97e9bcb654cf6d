#pragma once
// File layout shared by the sweep writer and the report reader.

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "yulefx/bench.hpp"

namespace yulefx::bench {

inline constexpr std::string_view kMetricsFile = "metrics.csv";
inline constexpr std::string_view kCellsFile = "cells.csv";
inline constexpr std::string_view kEffectsFile = "fixed_effects.csv";
inline constexpr std::string_view kTable1File = "table1.txt";
inline constexpr std::string_view kCoefficientsFile = "coefficients.csv";

/// Writes manifest.json via a temporary file and rename. Keys of `extra` are kept.
void write_manifest(const std::filesystem::path& dir, const SweepManifest& manifest, const nlohmann::json& extra);

}  // namespace yulefx::bench
