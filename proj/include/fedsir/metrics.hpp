#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fedsir/config.hpp"
#include "fedsir/orchestrator.hpp"

// Run outputs: a per-round CSV stream and a JSON summary. Columns:
//   round                      1-based round index
//   global_accuracy            held-out accuracy of the aggregated model
//   clean_accuracy             same for the clean reference model, or em-dash
//   mean_noise_rate            mean residual noise rate across clients
//   client_noise_rates         semicolon-joined per-client rates
//   aggregation_weights        semicolon-joined final per-client weights
//   relabel_examined           summed over clients; em-dash off relabel rounds
//   relabel_changed            likewise
//   relabel_changed_correctly  likewise
// Absent or non-finite cells render as an em-dash so every cell is either a
// finite number or visibly missing.

namespace fedsir {

std::string metrics_csv(const ExperimentResult& result);

// Final/best accuracy, the per-client identification outcome, and relabeling
// aggregates, keyed for the sweep report.
nlohmann::json summarize(const ParsedConfig& cfg,
                         const ExperimentResult& result);

// Write-temp-then-rename so readers never observe a partial file.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace fedsir
