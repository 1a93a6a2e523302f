#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fedsir/orchestrator.hpp"

// Experiment configs are flat INI-style text: [section] headers, key = value
// lines, '#' comments. Every key has a documented default; unknown keys are
// rejected with their section-qualified path. parse(emit(cfg)) == cfg.

namespace fedsir {

struct ParsedConfig {
    ExperimentConfig experiment;
    // Optional path to a pre-featurized sample table; when set, the run
    // loads it instead of generating synthetic data.
    std::optional<std::string> feature_file;
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config(const std::filesystem::path& path);

// Canonical rendering of every field, suitable for provenance snapshots
// next to run outputs. Doubles use shortest exact round-trip form.
std::string emit_config(const ParsedConfig& cfg);

// "section.key=value" assignment applied on top of a parsed config, same
// validation as file keys. Used by the CLI --override flag.
void apply_override(ParsedConfig& cfg, const std::string& assignment);

// Sets the experiment seed and re-derives the dependent data seed, as the
// CLI --seed flag and sweep seed lists do.
void set_master_seed(ParsedConfig& cfg, std::uint64_t seed);

}  // namespace fedsir
