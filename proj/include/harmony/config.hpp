#pragma once

// Run configuration for the command-line front end. TOML and JSON documents
// share one schema.

#include "harmony/combat.hpp"
#include "harmony/predictors.hpp"
#include "harmony/pretty.hpp"
#include "harmony/schemes.hpp"
#include "harmony/synthgen.hpp"
#include "harmony/tabular.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace harmony::config {

/// Reads a .toml or .json file into a JSON value. Anything else is tried as
/// TOML. Throws ConfigError with the parser's position on syntax errors.
nlohmann::json load_document(const std::filesystem::path& path);

/// Unknown keys are errors.
combat::CombatConfig combat_from_json(const nlohmann::json& j);
nlohmann::json combat_to_json(const combat::CombatConfig& c);

/// Schema keys: site_col, target_col, feature_cols (string or list),
/// covariate_cols, task ("classification" or "regression").
Schema schema_from_json(const nlohmann::json& j);

struct DatasetSource {
    std::optional<std::filesystem::path> path;
    std::optional<synth::GenConfig> generate;
    /// Generator seed given in the document; otherwise derived from the run seed.
    std::optional<std::uint64_t> generate_seed;
    std::optional<synth::DependenceSpec> dependence;
    std::optional<synth::IndependenceSpec> independence;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    DatasetSource source;
    Schema schema;
    int k = 5;
    int repeats = 1;
    std::vector<schemes::SchemeKind> schemes;
    std::optional<predictors::PredictorSpec> predictor;
    nlohmann::json pretty = nlohmann::json::object();
    combat::CombatConfig combat;
    bool use_covariates = false;
    /// Class label counted as positive for F1; empty picks the last class.
    std::string f1_positive;
    /// The parsed document, used for the manifest hash.
    nlohmann::json document;

    bool classification() const;
};

/// Validates every field and reports all problems in one ConfigError.
/// Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Loads or generates the dataset, then applies any sampler.
Dataset load_run_dataset(const RunConfig& run);

/// One experiment config per scheme, all sharing the run's folds.
std::vector<schemes::ExperimentConfig> experiment_configs(const RunConfig& run, const TaskKind& task);

} // namespace harmony::config
