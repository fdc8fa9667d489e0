#pragma once

// Leakage-free harmonization by pretended targets.
//
// Unlabeled samples are harmonized once per candidate target value and scored
// by a predictive model trained on harmonized training data. The resulting
// score matrix (one column per candidate) feeds a stack model that produces
// the final prediction. Stack training inputs are produced out-of-sample by an
// inner cross-validation over the training set.

#include "harmony/combat.hpp"
#include "harmony/predictors.hpp"
#include "harmony/tabular.hpp"

#include <cstdint>
#include <vector>

namespace harmony::pretty {

struct PrettyConfig {
    int k_inner = 5;
    /// Regression: number of linearly spaced pretend values (ignored if
    /// explicit values are given). Classification always pretends every class.
    int n_pretend = 10;
    std::vector<double> explicit_pretend_values;
    predictors::PredictorSpec predictive = predictors::PredictorSpec::random_forest_classifier();
    predictors::PredictorSpec stack = predictors::PredictorSpec::logistic_regression();
    combat::CombatConfig combat;
    /// Pass the dataset's non-target covariates to ComBat alongside the target.
    bool use_covariates = false;
    std::uint64_t seed = 0;

    /// Sensible predictive/stack defaults for a task.
    static PrettyConfig defaults_for(const TaskKind& task);

    void validate(const TaskKind& task) const;
    nlohmann::json to_json() const;
    static PrettyConfig from_json(const nlohmann::json& j, const TaskKind& task);
};

/// Pretend values in column order: class indices 0..K-1 for classification,
/// r evenly spaced values over [min, max] of the training target for regression.
std::vector<double> enumerate_pretend_values(const Eigen::VectorXd& target, const TaskKind& task, int r);

struct ScoreMatrix {
    Eigen::MatrixXd values; ///< m x r
    std::vector<double> pretend_values;
};

/// For each pretend value, encodes it as the target covariate for all rows,
/// harmonizes, and records the predictor output: P(class 1) for binary tasks,
/// P(class v) for multi-class, the point prediction for regression.
ScoreMatrix build_score_matrix(const combat::CombatModel& combat, const predictors::FittedPredictor& predictor,
                               const UnlabeledData& data, std::span<const double> pretend_values,
                               const TaskKind& task, bool use_covariates = false);

struct PrettyModel {
    combat::CombatModel final_combat;
    predictors::FittedPredictor final_predictor;
    predictors::FittedPredictor stack;
    std::vector<double> pretend_values;
    TaskKind task;
    bool use_covariates = false;
    /// Out-of-sample score matrix the stack model was trained on.
    Eigen::MatrixXd oos_scores;

    nlohmann::json to_json() const;
    static PrettyModel from_json(const nlohmann::json& j);
};

struct PrettyPrediction {
    Eigen::VectorXd predictions; ///< class index or regression value
    Eigen::MatrixXd scores;      ///< classification: stack class probabilities; regression: m x 1
    ScoreMatrix score_matrix;
};

PrettyModel fit(const Dataset& train, const PrettyConfig& config);

/// No target argument: predictions depend only on features, sites, covariates.
PrettyPrediction predict(const PrettyModel& model, const UnlabeledData& data);

/// Inner folds stratified by (site, class) for classification and by site for
/// regression. Throws DataError when an inner-train side loses a site or class.
FoldPlan make_inner_folds(const Dataset& train, int k, std::uint64_t seed);

} // namespace harmony::pretty
