#pragma once

// Uniform train/predict contract over random forests, L2 logistic regression,
// and ridge regression.

#include <Eigen/Dense>
#include "json.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace harmony::predictors {

enum class PredictorKind { RandomForestClassifier, RandomForestRegressor, Logistic, Ridge };

std::string to_string(PredictorKind kind);
PredictorKind predictor_kind_from_string(const std::string& name);
bool is_classifier(PredictorKind kind);

struct ForestParams {
    int n_trees = 100;
    int max_depth = 0; ///< 0 = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    /// Features tried per split; 0 = default (sqrt(p) classification, p regression).
    int max_features = 0;
    bool bootstrap = true;
};

struct LogisticParams {
    double l2 = 1.0;           ///< penalty 0.5 * l2 * ||w||^2, intercept unpenalized
    double grad_tol = 1e-6;    ///< stop when ||grad||_2 < grad_tol
    int max_iters = 1000;
    int history = 10;          ///< L-BFGS memory
};

struct RidgeParams {
    double alpha = 1.0;
};

struct PredictorSpec {
    PredictorKind kind = PredictorKind::RandomForestClassifier;
    ForestParams forest;
    LogisticParams logistic;
    RidgeParams ridge;
    std::uint64_t seed = 0;

    static PredictorSpec random_forest_classifier(std::uint64_t seed = 0);
    static PredictorSpec random_forest_regressor(std::uint64_t seed = 0);
    static PredictorSpec logistic_regression(double l2 = 1.0);
    static PredictorSpec ridge_regression(double alpha = 1.0);

    /// Throws ConfigError on invalid hyperparameters for this kind.
    void validate() const;

    /// Builds a spec from {"kind": ..., hyperparameter keys...}. Unknown keys are errors.
    static PredictorSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Training targets: class indices 0..n_classes-1 for classifiers
/// (n_classes >= 2), raw values for regressors (n_classes == 0).
struct Targets {
    Eigen::VectorXd values;
    int n_classes = 0;
};

// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;      ///< -1 for leaves
    double threshold = 0.0; ///< go left when x <= threshold
    int left = -1;
    int right = -1;
    int value_offset = 0;  ///< into the tree's leaf value array (leaves only)
};

struct Tree {
    std::vector<TreeNode> nodes;
    std::vector<double> values; ///< leaves: class frequencies (k) or mean (1)
};

struct ForestModel {
    std::vector<Tree> trees;
    int n_outputs = 1; ///< class count, or 1 for regression
    bool classification = true;
};

struct LogisticModel {
    /// Binary: 1 x p weights and a single intercept. Multinomial: k x p, k intercepts.
    Eigen::MatrixXd weights;
    Eigen::VectorXd intercepts;
    int n_classes = 2;
    int iterations = 0;
    double grad_norm = 0.0;
};

struct RidgeModel {
    Eigen::VectorXd weights;
    double intercept = 0.0;
};

class FittedPredictor {
public:
    using Params = std::variant<ForestModel, LogisticModel, RidgeModel>;

    FittedPredictor(PredictorKind kind, Params params, int n_features, int n_classes);

    PredictorKind kind() const noexcept { return kind_; }
    int n_features() const noexcept { return n_features_; }
    /// 0 for regressors.
    int n_classes() const noexcept { return n_classes_; }
    bool is_classifier() const noexcept { return n_classes_ > 0; }
    const Params& params() const noexcept { return params_; }

    nlohmann::json to_json() const;
    static FittedPredictor from_json(const nlohmann::json& j);

private:
    PredictorKind kind_;
    Params params_;
    int n_features_;
    int n_classes_;
};

FittedPredictor train(const PredictorSpec& spec, const Eigen::MatrixXd& X, const Targets& y);

/// Classification: m x k class probabilities (rows sum to 1). Regression: m x 1.
Eigen::MatrixXd predict_scores(const FittedPredictor& model, const Eigen::MatrixXd& X);

/// Argmax class index (lowest index wins ties) or the regression point prediction.
Eigen::VectorXd predict(const FittedPredictor& model, const Eigen::MatrixXd& X);

// Family-level entry points (used by train/predict_scores and tested directly).

ForestModel train_forest(const ForestParams& params, bool classification, const Eigen::MatrixXd& X,
                         const Targets& y, std::uint64_t seed);
Eigen::MatrixXd forest_scores(const ForestModel& model, const Eigen::MatrixXd& X);

LogisticModel train_logistic(const LogisticParams& params, const Eigen::MatrixXd& X, const Targets& y);
Eigen::MatrixXd logistic_scores(const LogisticModel& model, const Eigen::MatrixXd& X);

/// Penalized negative log-likelihood and its gradient at a flat parameter
/// vector. Binary layout: [w_0..w_{p-1}, b]. Multinomial: k blocks of that.
double logistic_objective(const Eigen::MatrixXd& X, const Targets& y, double l2, const Eigen::VectorXd& params,
                          Eigen::VectorXd* grad);

RidgeModel train_ridge(const RidgeParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
Eigen::VectorXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& X);

} // namespace harmony::predictors
