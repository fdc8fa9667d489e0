#include "harmony/error.hpp"
#include "harmony/json_io.hpp"
#include "harmony/predictors.hpp"

#include <cmath>
#include <set>

namespace harmony::predictors {

using nlohmann::json;

std::string to_string(PredictorKind kind)
{
    switch (kind) {
    case PredictorKind::RandomForestClassifier: return "random_forest_classifier";
    case PredictorKind::RandomForestRegressor: return "random_forest_regressor";
    case PredictorKind::Logistic: return "logistic";
    case PredictorKind::Ridge: return "ridge";
    }
    return "unknown";
}

PredictorKind predictor_kind_from_string(const std::string& name)
{
    for (auto k : {PredictorKind::RandomForestClassifier, PredictorKind::RandomForestRegressor, PredictorKind::Logistic,
                   PredictorKind::Ridge})
        if (to_string(k) == name)
            return k;
    throw ConfigError("unknown predictor kind '" + name +
                      "' (expected random_forest_classifier, random_forest_regressor, logistic, ridge)");
}

bool is_classifier(PredictorKind kind)
{
    return kind == PredictorKind::RandomForestClassifier || kind == PredictorKind::Logistic;
}

PredictorSpec PredictorSpec::random_forest_classifier(std::uint64_t seed)
{
    PredictorSpec s;
    s.kind = PredictorKind::RandomForestClassifier;
    s.seed = seed;
    return s;
}

PredictorSpec PredictorSpec::random_forest_regressor(std::uint64_t seed)
{
    PredictorSpec s;
    s.kind = PredictorKind::RandomForestRegressor;
    s.seed = seed;
    return s;
}

PredictorSpec PredictorSpec::logistic_regression(double l2)
{
    PredictorSpec s;
    s.kind = PredictorKind::Logistic;
    s.logistic.l2 = l2;
    return s;
}

PredictorSpec PredictorSpec::ridge_regression(double alpha)
{
    PredictorSpec s;
    s.kind = PredictorKind::Ridge;
    s.ridge.alpha = alpha;
    return s;
}

void PredictorSpec::validate() const
{
    switch (kind) {
    case PredictorKind::RandomForestClassifier:
    case PredictorKind::RandomForestRegressor:
        if (forest.n_trees < 1)
            throw ConfigError("n_trees must be >= 1");
        if (forest.max_depth < 0)
            throw ConfigError("max_depth must be >= 0 (0 = unlimited)");
        if (forest.min_samples_split < 2)
            throw ConfigError("min_samples_split must be >= 2");
        if (forest.min_samples_leaf < 1)
            throw ConfigError("min_samples_leaf must be >= 1");
        if (forest.max_features < 0)
            throw ConfigError("max_features must be >= 0 (0 = default)");
        break;
    case PredictorKind::Logistic:
        if (!(logistic.l2 >= 0.0))
            throw ConfigError("logistic l2 must be >= 0");
        if (!(logistic.grad_tol > 0.0))
            throw ConfigError("logistic grad_tol must be > 0");
        if (logistic.max_iters < 1)
            throw ConfigError("logistic max_iters must be >= 1");
        if (logistic.history < 1)
            throw ConfigError("logistic history must be >= 1");
        break;
    case PredictorKind::Ridge:
        if (!(ridge.alpha >= 0.0))
            throw ConfigError("ridge alpha must be >= 0");
        break;
    }
}

PredictorSpec PredictorSpec::from_json(const json& j)
{
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError("predictor spec needs a 'kind'");
    PredictorSpec s;
    s.kind = predictor_kind_from_string(j.at("kind").get<std::string>());
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "kind")
                continue;
            if (key == "seed") {
                s.seed = v.get<std::uint64_t>();
                continue;
            }
            const bool forest = s.kind == PredictorKind::RandomForestClassifier || s.kind == PredictorKind::RandomForestRegressor;
            if (forest && key == "n_trees") s.forest.n_trees = v.get<int>();
            else if (forest && key == "max_depth") s.forest.max_depth = v.get<int>();
            else if (forest && key == "min_samples_split") s.forest.min_samples_split = v.get<int>();
            else if (forest && key == "min_samples_leaf") s.forest.min_samples_leaf = v.get<int>();
            else if (forest && key == "max_features") s.forest.max_features = v.get<int>();
            else if (forest && key == "bootstrap") s.forest.bootstrap = v.get<bool>();
            else if (s.kind == PredictorKind::Logistic && key == "l2") s.logistic.l2 = v.get<double>();
            else if (s.kind == PredictorKind::Logistic && key == "grad_tol") s.logistic.grad_tol = v.get<double>();
            else if (s.kind == PredictorKind::Logistic && key == "max_iters") s.logistic.max_iters = v.get<int>();
            else if (s.kind == PredictorKind::Logistic && key == "history") s.logistic.history = v.get<int>();
            else if (s.kind == PredictorKind::Ridge && key == "alpha") s.ridge.alpha = v.get<double>();
            else
                throw ConfigError("unknown hyperparameter '" + key + "' for predictor '" + to_string(s.kind) + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("predictor spec: ") + e.what());
    }
    s.validate();
    return s;
}

json PredictorSpec::to_json() const
{
    json j{{"kind", to_string(kind)}};
    switch (kind) {
    case PredictorKind::RandomForestClassifier:
    case PredictorKind::RandomForestRegressor:
        j["n_trees"] = forest.n_trees;
        j["max_depth"] = forest.max_depth;
        j["min_samples_split"] = forest.min_samples_split;
        j["min_samples_leaf"] = forest.min_samples_leaf;
        j["max_features"] = forest.max_features;
        j["bootstrap"] = forest.bootstrap;
        j["seed"] = seed;
        break;
    case PredictorKind::Logistic:
        j["l2"] = logistic.l2;
        j["grad_tol"] = logistic.grad_tol;
        j["max_iters"] = logistic.max_iters;
        j["history"] = logistic.history;
        break;
    case PredictorKind::Ridge:
        j["alpha"] = ridge.alpha;
        break;
    }
    return j;
}

// ---------------------------------------------------------------------------

FittedPredictor::FittedPredictor(PredictorKind kind, Params params, int n_features, int n_classes)
    : kind_(kind), params_(std::move(params)), n_features_(n_features), n_classes_(n_classes)
{
}

FittedPredictor train(const PredictorSpec& spec, const Eigen::MatrixXd& X, const Targets& y)
{
    spec.validate();
    if (X.rows() < 2)
        throw DataError("training needs at least 2 rows");
    if (y.values.size() != X.rows())
        throw DataError("target length " + std::to_string(y.values.size()) + " does not match row count " +
                        std::to_string(X.rows()));
    if (!X.allFinite() || !y.values.allFinite())
        throw DataError("non-finite training input");

    const int p = static_cast<int>(X.cols());
    if (is_classifier(spec.kind)) {
        if (y.n_classes < 2)
            throw ConfigError(to_string(spec.kind) + " needs a classification target");
        std::set<int> seen;
        for (Eigen::Index i = 0; i < y.values.size(); ++i) {
            const double v = y.values[i];
            if (v < 0 || v >= y.n_classes || v != std::floor(v))
                throw DataError("class index out of range in training target");
            seen.insert(static_cast<int>(v));
        }
        if (seen.size() < 2)
            throw DataError("classification training input contains a single class");
    } else if (y.n_classes != 0) {
        throw ConfigError(to_string(spec.kind) + " needs a regression target");
    }

    switch (spec.kind) {
    case PredictorKind::RandomForestClassifier:
        return {spec.kind, train_forest(spec.forest, true, X, y, spec.seed), p, y.n_classes};
    case PredictorKind::RandomForestRegressor:
        return {spec.kind, train_forest(spec.forest, false, X, y, spec.seed), p, 0};
    case PredictorKind::Logistic:
        return {spec.kind, train_logistic(spec.logistic, X, y), p, y.n_classes};
    case PredictorKind::Ridge:
        return {spec.kind, train_ridge(spec.ridge, X, y.values), p, 0};
    }
    throw ConfigError("unhandled predictor kind");
}

Eigen::MatrixXd predict_scores(const FittedPredictor& model, const Eigen::MatrixXd& X)
{
    if (X.cols() != model.n_features())
        throw DataError("input width " + std::to_string(X.cols()) + " does not match trained width " +
                          std::to_string(model.n_features()));
    return std::visit(
        [&](const auto& m) -> Eigen::MatrixXd {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ForestModel>)
                return forest_scores(m, X);
            else if constexpr (std::is_same_v<T, LogisticModel>)
                return logistic_scores(m, X);
            else
                return ridge_predict(m, X);
        },
        model.params());
}

Eigen::VectorXd predict(const FittedPredictor& model, const Eigen::MatrixXd& X)
{
    const Eigen::MatrixXd scores = predict_scores(model, X);
    if (!model.is_classifier())
        return scores.col(0);
    Eigen::VectorXd out(scores.rows());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c)
            if (scores(i, c) > scores(i, best))
                best = c;
        out[i] = static_cast<double>(best);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

json FittedPredictor::to_json() const
{
    json j{{"kind", to_string(kind_)}, {"n_features", n_features_}, {"n_classes", n_classes_}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ForestModel>) {
                j["n_outputs"] = m.n_outputs;
                json trees = json::array();
                for (const auto& t : m.trees) {
                    json feat = json::array(), thr = json::array(), left = json::array(), right = json::array(),
                         off = json::array();
                    for (const auto& n : t.nodes) {
                        feat.push_back(n.feature);
                        thr.push_back(n.threshold);
                        left.push_back(n.left);
                        right.push_back(n.right);
                        off.push_back(n.value_offset);
                    }
                    trees.push_back({{"feature", feat}, {"threshold", thr}, {"left", left}, {"right", right},
                                     {"value_offset", off}, {"values", t.values}});
                }
                j["trees"] = std::move(trees);
            } else if constexpr (std::is_same_v<T, LogisticModel>) {
                j["weights"] = jsonio::matrix_to_json(m.weights);
                j["intercepts"] = jsonio::vector_to_json(m.intercepts);
                j["iterations"] = m.iterations;
                j["grad_norm"] = m.grad_norm;
            } else {
                j["weights"] = jsonio::vector_to_json(m.weights);
                j["intercept"] = m.intercept;
            }
        },
        params_);
    return j;
}

FittedPredictor FittedPredictor::from_json(const json& j)
{
    try {
        const auto kind = predictor_kind_from_string(j.at("kind").get<std::string>());
        const int p = j.at("n_features").get<int>();
        const int k = j.at("n_classes").get<int>();
        switch (kind) {
        case PredictorKind::RandomForestClassifier:
        case PredictorKind::RandomForestRegressor: {
            ForestModel m;
            m.classification = kind == PredictorKind::RandomForestClassifier;
            m.n_outputs = j.at("n_outputs").get<int>();
            for (const auto& tj : j.at("trees")) {
                Tree t;
                const auto feat = tj.at("feature").get<std::vector<int>>();
                const auto thr = tj.at("threshold").get<std::vector<double>>();
                const auto left = tj.at("left").get<std::vector<int>>();
                const auto right = tj.at("right").get<std::vector<int>>();
                const auto off = tj.at("value_offset").get<std::vector<int>>();
                for (std::size_t i = 0; i < feat.size(); ++i)
                    t.nodes.push_back({feat.at(i), thr.at(i), left.at(i), right.at(i), off.at(i)});
                t.values = tj.at("values").get<std::vector<double>>();
                m.trees.push_back(std::move(t));
            }
            return {kind, std::move(m), p, k};
        }
        case PredictorKind::Logistic: {
            LogisticModel m;
            m.intercepts = jsonio::vector_from_json(j.at("intercepts"));
            m.weights = jsonio::matrix_from_json(j.at("weights"), m.intercepts.size(), p);
            m.n_classes = k;
            m.iterations = j.at("iterations").get<int>();
            m.grad_norm = j.at("grad_norm").get<double>();
            return {kind, std::move(m), p, k};
        }
        case PredictorKind::Ridge: {
            RidgeModel m;
            m.weights = jsonio::vector_from_json(j.at("weights"), p);
            m.intercept = j.at("intercept").get<double>();
            return {kind, std::move(m), p, 0};
        }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed predictor: ") + e.what());
    }
    throw ConfigError("malformed predictor");
}

} // namespace harmony::predictors
