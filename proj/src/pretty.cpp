#include "harmony/pretty.hpp"

#include "harmony/error.hpp"
#include "harmony/json_io.hpp"
#include "harmony/parallel.hpp"
#include "harmony/seed.hpp"

#include <algorithm>
#include <set>

namespace harmony::pretty {

using nlohmann::json;
using predictors::PredictorKind;
using predictors::PredictorSpec;

namespace {

predictors::Targets targets_of(const Dataset& d)
{
    return {d.target, d.task.is_classification() ? d.task.n_classes() : 0};
}

Eigen::MatrixXd with_covariates(Eigen::MatrixXd target_cov, const Eigen::MatrixXd& covariates, bool use)
{
    if (!use || covariates.cols() == 0)
        return target_cov;
    Eigen::MatrixXd out(target_cov.rows(), target_cov.cols() + covariates.cols());
    out << target_cov, covariates;
    return out;
}

Eigen::MatrixXd training_covariates(const Dataset& d, bool use_covariates)
{
    return with_covariates(encode_target_covariate(d.target, d.task), d.covariates, use_covariates);
}

PredictorSpec seeded(PredictorSpec spec, std::uint64_t s)
{
    spec.seed = s;
    return spec;
}

json task_to_json(const TaskKind& t)
{
    if (t.is_regression())
        return {{"kind", "regression"}};
    return {{"kind", "classification"}, {"classes", t.classes()}};
}

TaskKind task_from_json(const json& j)
{
    if (j.at("kind").get<std::string>() == "regression")
        return TaskKind::regression();
    return TaskKind::classification(j.at("classes").get<std::vector<std::string>>());
}

} // namespace

PrettyConfig PrettyConfig::defaults_for(const TaskKind& task)
{
    PrettyConfig c;
    if (task.is_regression()) {
        c.predictive = PredictorSpec::ridge_regression(1.0);
        c.stack = PredictorSpec::ridge_regression(1.0);
    } else {
        c.predictive = PredictorSpec::random_forest_classifier();
        c.stack = PredictorSpec::logistic_regression();
    }
    return c;
}

void PrettyConfig::validate(const TaskKind& task) const
{
    if (k_inner < 2)
        throw ConfigError("k_inner must be >= 2");
    if (task.is_regression() && explicit_pretend_values.empty() && n_pretend < 2)
        throw ConfigError("regression needs at least 2 pretend values");
    if (task.is_regression() && !explicit_pretend_values.empty() && explicit_pretend_values.size() < 2)
        throw ConfigError("regression needs at least 2 pretend values");
    if (task.is_classification() && !explicit_pretend_values.empty())
        throw ConfigError("classification pretends every class; explicit pretend values are not allowed");
    predictive.validate();
    stack.validate();
    combat.validate();
    const bool cls = task.is_classification();
    if (predictors::is_classifier(predictive.kind) != cls)
        throw ConfigError("predictive model kind '" + predictors::to_string(predictive.kind) + "' does not match the task");
    if (predictors::is_classifier(stack.kind) != cls)
        throw ConfigError("stack model kind '" + predictors::to_string(stack.kind) + "' does not match the task");
}

json PrettyConfig::to_json() const
{
    return {{"k_inner", k_inner},
            {"n_pretend", n_pretend},
            {"pretend_values", explicit_pretend_values},
            {"predictive", predictive.to_json()},
            {"stack", stack.to_json()},
            {"use_covariates", use_covariates},
            {"seed", seed}};
}

PrettyConfig PrettyConfig::from_json(const json& j, const TaskKind& task)
{
    PrettyConfig c = defaults_for(task);
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "k_inner") c.k_inner = v.get<int>();
            else if (key == "n_pretend") c.n_pretend = v.get<int>();
            else if (key == "pretend_values") c.explicit_pretend_values = v.get<std::vector<double>>();
            else if (key == "predictive") c.predictive = PredictorSpec::from_json(v);
            else if (key == "stack") c.stack = PredictorSpec::from_json(v);
            else if (key == "use_covariates") c.use_covariates = v.get<bool>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw ConfigError("unknown pretty option '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("pretty config: ") + e.what());
    }
    return c;
}

std::vector<double> enumerate_pretend_values(const Eigen::VectorXd& target, const TaskKind& task, int r)
{
    if (task.is_classification()) {
        std::vector<double> out;
        for (int c = 0; c < task.n_classes(); ++c)
            out.push_back(c);
        return out;
    }
    if (r < 2)
        throw ConfigError("regression needs at least 2 pretend values, got " + std::to_string(r));
    if (target.size() == 0)
        throw DataError("cannot enumerate pretend values from an empty target");
    const double lo = target.minCoeff();
    const double hi = target.maxCoeff();
    if (!(hi > lo))
        throw DataError("regression target is constant; pretend range is empty");
    std::vector<double> out(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i)
        out[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(r - 1);
    out.back() = hi;
    return out;
}

ScoreMatrix build_score_matrix(const combat::CombatModel& combat, const predictors::FittedPredictor& predictor,
                               const UnlabeledData& data, std::span<const double> pretend_values, const TaskKind& task,
                               bool use_covariates)
{
    const Eigen::Index m = data.rows();
    if (predictor.n_features() != data.features.cols())
        throw DataError("predictor width does not match feature width");
    ScoreMatrix out;
    out.pretend_values.assign(pretend_values.begin(), pretend_values.end());
    out.values.resize(m, static_cast<Eigen::Index>(pretend_values.size()));

    for (std::size_t c = 0; c < pretend_values.size(); ++c) {
        const double v = pretend_values[c];
        const Eigen::MatrixXd cov =
            with_covariates(encode_target_covariate(Eigen::VectorXd::Constant(m, v), task), data.covariates, use_covariates);
        const Eigen::MatrixXd harmonized = combat::transform(combat, data.features, data.sites, cov);
        const Eigen::MatrixXd scores = predictors::predict_scores(predictor, harmonized);
        Eigen::Index column = 0;
        if (task.is_classification())
            column = task.n_classes() == 2 ? 1 : static_cast<Eigen::Index>(v);
        out.values.col(static_cast<Eigen::Index>(c)) = scores.col(column);
    }
    if (!out.values.allFinite())
        throw NumericalError("score matrix contains non-finite entries");
    return out;
}

FoldPlan make_inner_folds(const Dataset& train, int k, std::uint64_t seed)
{
    std::vector<std::string> keys;
    keys.reserve(train.sites.size());
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
        std::string key = train.sites[static_cast<std::size_t>(i)];
        if (train.task.is_classification())
            key += '\x1f' + train.target_label(i);
        keys.push_back(std::move(key));
    }
    const auto strata = factorize(keys);
    FoldPlan plan = make_folds(train.rows(), strata, k, 1, seed);

    const auto all_sites = distinct_sites(train.sites);
    std::set<int> all_classes;
    if (train.task.is_classification())
        for (Eigen::Index i = 0; i < train.rows(); ++i)
            all_classes.insert(static_cast<int>(train.target[i]));

    for (const auto& split : plan.splits) {
        std::map<std::string, int> site_counts;
        std::set<int> classes;
        for (int r : split.train) {
            ++site_counts[train.sites[static_cast<std::size_t>(r)]];
            if (train.task.is_classification())
                classes.insert(static_cast<int>(train.target[r]));
        }
        for (const auto& s : all_sites) {
            auto it = site_counts.find(s);
            if (it == site_counts.end() || it->second < 2)
                throw DataError("inner fold " + std::to_string(split.fold) + ": site '" + s +
                                "' has fewer than 2 rows on the training side");
        }
        for (int c : all_classes)
            if (!classes.count(c))
                throw DataError("inner fold " + std::to_string(split.fold) + ": class '" + train.task.classes()[static_cast<std::size_t>(c)] +
                                "' missing from the training side");
        if (classes.size() == 1)
            throw DataError("inner fold " + std::to_string(split.fold) + ": training side has a single class");
    }
    return plan;
}

PrettyModel fit(const Dataset& train, const PrettyConfig& config)
{
    train.validate();
    config.validate(train.task);
    const TaskKind& task = train.task;

    const auto pretend = config.explicit_pretend_values.empty()
                             ? enumerate_pretend_values(train.target, task, config.n_pretend)
                             : config.explicit_pretend_values;

    const FoldPlan inner = make_inner_folds(train, config.k_inner, seed::derive(config.seed, "inner-folds"));
    const std::uint64_t predictive_seed = seed::derive(config.seed, "predictive");

    Eigen::MatrixXd oos(train.rows(), static_cast<Eigen::Index>(pretend.size()));
    parallel_for(inner.splits.size(), [&](std::size_t f) {
        const auto& split = inner.splits[f];
        try {
            const Dataset inner_train = subset(train, split.train);
            const UnlabeledData validation = subset(train.unlabeled(), split.test);
            const auto fitted = combat::fit_transform(inner_train.features, inner_train.sites,
                                                      training_covariates(inner_train, config.use_covariates), config.combat);
            const auto predictor = predictors::train(seeded(config.predictive, seed::derive(predictive_seed, f)),
                                                     fitted.adjusted, targets_of(inner_train));
            const ScoreMatrix scores =
                build_score_matrix(fitted.model, predictor, validation, pretend, task, config.use_covariates);
            for (std::size_t i = 0; i < split.test.size(); ++i)
                oos.row(split.test[i]) = scores.values.row(static_cast<Eigen::Index>(i));
        } catch (const Error& e) {
            rethrow_with_context(e, "inner fold " + std::to_string(f));
        }
    });

    const auto stack = predictors::train(seeded(config.stack, seed::derive(config.seed, "stack")), oos, targets_of(train));

    auto final_fit = combat::fit_transform(train.features, train.sites, training_covariates(train, config.use_covariates),
                                           config.combat);
    auto final_predictor = predictors::train(seeded(config.predictive, seed::derive(predictive_seed, "final")),
                                             final_fit.adjusted, targets_of(train));

    return PrettyModel{std::move(final_fit.model), std::move(final_predictor), stack, pretend, task,
                       config.use_covariates, std::move(oos)};
}

PrettyPrediction predict(const PrettyModel& model, const UnlabeledData& data)
{
    PrettyPrediction out;
    out.score_matrix = build_score_matrix(model.final_combat, model.final_predictor, data, model.pretend_values,
                                          model.task, model.use_covariates);
    out.scores = predictors::predict_scores(model.stack, out.score_matrix.values);
    out.predictions = predictors::predict(model.stack, out.score_matrix.values);
    return out;
}

json PrettyModel::to_json() const
{
    return {{"format", "harmony.pretty"},
            {"version", 1},
            {"task", task_to_json(task)},
            {"pretend_values", pretend_values},
            {"use_covariates", use_covariates},
            {"final_combat", final_combat.to_json()},
            {"final_predictor", final_predictor.to_json()},
            {"stack", stack.to_json()},
            {"oos_scores", jsonio::matrix_to_json(oos_scores)}};
}

PrettyModel PrettyModel::from_json(const json& j)
{
    try {
        if (j.at("format").get<std::string>() != "harmony.pretty")
            throw ConfigError("not a PrettYharmonize model document");
        const auto pretend = j.at("pretend_values").get<std::vector<double>>();
        const auto& oos = j.at("oos_scores");
        return PrettyModel{combat::CombatModel::from_json(j.at("final_combat")),
                           predictors::FittedPredictor::from_json(j.at("final_predictor")),
                           predictors::FittedPredictor::from_json(j.at("stack")),
                           pretend,
                           task_from_json(j.at("task")),
                           j.at("use_covariates").get<bool>(),
                           jsonio::matrix_from_json(oos, static_cast<Eigen::Index>(oos.size()),
                                                    static_cast<Eigen::Index>(pretend.size()))};
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed PrettYharmonize model: ") + e.what());
    }
}

} // namespace harmony::pretty
