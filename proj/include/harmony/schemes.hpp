#pragma once

// The five benchmark harmonization schemes and a cross-validated runner.

#include "harmony/combat.hpp"
#include "harmony/predictors.hpp"
#include "harmony/pretty.hpp"
#include "harmony/tabular.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace harmony::schemes {

enum class SchemeKind { Unharmonized, WDH, TTL, NoTarget, Pretty };

std::string to_string(SchemeKind kind);
SchemeKind scheme_kind_from_string(const std::string& name);
/// WDH and TTL let test-fold targets reach ComBat.
bool has_leakage(SchemeKind kind);

struct ExperimentConfig {
    SchemeKind scheme = SchemeKind::Unharmonized;
    predictors::PredictorSpec predictor = predictors::PredictorSpec::random_forest_classifier();
    int k = 5;
    int repeats = 1;
    std::uint64_t seed = 0;
    combat::CombatConfig combat;
    /// Pass non-target covariates to ComBat in every harmonizing scheme.
    bool use_covariates = false;
    /// Used by SchemeKind::Pretty. Its seed is replaced per fold.
    pretty::PrettyConfig pretty;
    /// Class index treated as positive for F1; -1 picks the last class.
    int f1_positive = -1;

    /// Defaults for a task: RF classifier or ridge, plus matching pretty models.
    static ExperimentConfig defaults_for(SchemeKind scheme, const TaskKind& task);

    void validate(const TaskKind& task) const;
};

/// Counts transform calls that carried test-fold targets.
class LeakageAudit {
public:
    void record() noexcept { count_.fetch_add(1, std::memory_order_relaxed); }
    int count() const noexcept { return count_.load(std::memory_order_relaxed); }

private:
    std::atomic<int> count_{0};
};

/// The only route by which scheme code can see test targets. Every read is
/// recorded in the audit.
class TestTargetChannel {
public:
    TestTargetChannel(const Eigen::VectorXd& targets, LeakageAudit& audit) : targets_(targets), audit_(audit) {}

    const Eigen::VectorXd& read() const
    {
        audit_.record();
        return targets_;
    }

private:
    const Eigen::VectorXd& targets_;
    LeakageAudit& audit_;
};

struct FoldOutput {
    Eigen::VectorXd predictions; ///< class indices or regression values
    Eigen::VectorXd scores;      ///< binary: P(class 1); otherwise equals predictions
};

/// Trains on `train` and predicts `test` under the configured scheme. WDH is
/// treated as plain training here; its pooled harmonization happens in
/// run_experiment before the folds are cut.
FoldOutput run_fold(const ExperimentConfig& config, const Dataset& train, const UnlabeledData& test,
                    const TestTargetChannel& test_targets, std::uint64_t fold_seed);

/// Metrics for a task: AUC/bACC/F1 (binary), bACC/F1 (multi-class), MAE/R2/AgeBias (regression).
std::map<std::string, double> evaluate(const TaskKind& task, const Eigen::VectorXd& y_true, const FoldOutput& out,
                                       int f1_positive);

struct FoldRecord {
    int fold = 0;
    int repeat = 0;
    std::map<std::string, double> metrics;
    double seconds = 0.0;
    std::vector<int> test_indices;
    FoldOutput output;
};

struct ExperimentReport {
    SchemeKind scheme = SchemeKind::Unharmonized;
    bool leakage = false;
    std::uint64_t seed = 0;
    std::vector<FoldRecord> folds;
    std::map<std::string, double> aggregate;
    /// Test-target-bearing transform calls observed during the run.
    int audit_count = 0;

    nlohmann::json to_json() const;
};

/// Folds shared by every scheme run with the same (k, repeats, seed).
FoldPlan experiment_folds(const Dataset& data, const ExperimentConfig& config);

ExperimentReport run_experiment(const Dataset& data, const ExperimentConfig& config);

struct ComparisonTable {
    std::vector<std::string> metric_names;
    std::vector<ExperimentReport> reports;

    std::string to_csv() const;
    std::string to_text() const;
};

/// Runs every config on the same folds. All configs must share k, repeats, seed.
ComparisonTable compare_schemes(const Dataset& data, const std::vector<ExperimentConfig>& configs);

/// Primary metric names for a task, in table column order.
std::vector<std::string> metric_names(const TaskKind& task);

} // namespace harmony::schemes
