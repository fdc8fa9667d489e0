#include "harmony/schemes.hpp"

#include "harmony/error.hpp"
#include "harmony/metrics.hpp"
#include "harmony/parallel.hpp"
#include "harmony/seed.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace harmony::schemes {

using nlohmann::json;

namespace {

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Eigen::MatrixXd hstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    if (b.cols() == 0)
        return a;
    if (a.cols() == 0)
        return b;
    Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

Eigen::MatrixXd extra_covariates(const Eigen::MatrixXd& covariates, Eigen::Index rows, bool use)
{
    if (use)
        return covariates;
    return Eigen::MatrixXd(rows, 0);
}

predictors::Targets targets_of(const Dataset& d)
{
    return {d.target, d.task.is_classification() ? d.task.n_classes() : 0};
}

FoldOutput predict_with(const predictors::FittedPredictor& model, const Eigen::MatrixXd& X)
{
    FoldOutput out;
    if (model.is_classifier()) {
        const Eigen::MatrixXd s = predictors::predict_scores(model, X);
        out.predictions = predictors::predict(model, X);
        out.scores = model.n_classes() == 2 ? Eigen::VectorXd(s.col(1)) : out.predictions;
    } else {
        out.predictions = predictors::predict(model, X);
        out.scores = out.predictions;
    }
    return out;
}

std::string fixed(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::string to_string(SchemeKind kind)
{
    switch (kind) {
    case SchemeKind::Unharmonized: return "Unharmonized";
    case SchemeKind::WDH: return "WDH";
    case SchemeKind::TTL: return "TTL";
    case SchemeKind::NoTarget: return "NoTarget";
    case SchemeKind::Pretty: return "PrettYharmonize";
    }
    return "?";
}

SchemeKind scheme_kind_from_string(const std::string& name)
{
    for (auto k : {SchemeKind::Unharmonized, SchemeKind::WDH, SchemeKind::TTL, SchemeKind::NoTarget, SchemeKind::Pretty})
        if (name == to_string(k))
            return k;
    if (name == "Pretty" || name == "pretty")
        return SchemeKind::Pretty;
    throw ConfigError("unknown scheme '" + name + "' (expected Unharmonized, WDH, TTL, NoTarget, PrettYharmonize)");
}

bool has_leakage(SchemeKind kind) { return kind == SchemeKind::WDH || kind == SchemeKind::TTL; }

ExperimentConfig ExperimentConfig::defaults_for(SchemeKind scheme, const TaskKind& task)
{
    ExperimentConfig c;
    c.scheme = scheme;
    c.predictor = task.is_classification() ? predictors::PredictorSpec::random_forest_classifier()
                                           : predictors::PredictorSpec::ridge_regression(1.0);
    c.pretty = pretty::PrettyConfig::defaults_for(task);
    c.pretty.predictive = c.predictor;
    return c;
}

void ExperimentConfig::validate(const TaskKind& task) const
{
    if (k < 2)
        throw ConfigError("k must be >= 2");
    if (repeats < 1)
        throw ConfigError("repeats must be >= 1");
    predictor.validate();
    combat.validate();
    if (predictors::is_classifier(predictor.kind) != task.is_classification())
        throw ConfigError("predictor '" + predictors::to_string(predictor.kind) + "' does not match the task");
    if (scheme == SchemeKind::Pretty)
        pretty.validate(task);
    if (task.is_classification() && (f1_positive < -1 || f1_positive >= task.n_classes()))
        throw ConfigError("f1_positive out of range");
}

std::vector<std::string> metric_names(const TaskKind& task)
{
    if (task.is_regression())
        return {"MAE", "R2", "AgeBias"};
    if (task.n_classes() == 2)
        return {"AUC", "bACC", "F1"};
    return {"bACC", "F1"};
}

std::map<std::string, double> evaluate(const TaskKind& task, const Eigen::VectorXd& y_true, const FoldOutput& out,
                                       int f1_positive)
{
    std::map<std::string, double> m;
    if (task.is_regression()) {
        m["MAE"] = metrics::mae(view(y_true), view(out.predictions));
        m["R2"] = metrics::r2(view(y_true), view(out.predictions));
        m["AgeBias"] = metrics::age_bias(view(y_true), view(out.predictions));
        return m;
    }
    const int positive = f1_positive < 0 ? task.n_classes() - 1 : f1_positive;
    if (task.n_classes() == 2)
        m["AUC"] = metrics::auc(view(y_true), view(out.scores));
    m["bACC"] = metrics::bacc(view(y_true), view(out.predictions), task.n_classes());
    m["F1"] = metrics::f1(view(y_true), view(out.predictions), positive);
    return m;
}

FoldOutput run_fold(const ExperimentConfig& config, const Dataset& train, const UnlabeledData& test,
                    const TestTargetChannel& test_targets, std::uint64_t fold_seed)
{
    const TaskKind& task = train.task;
    auto spec = config.predictor;
    spec.seed = seed::derive(fold_seed, "predictor");
    const auto train_extra = extra_covariates(train.covariates, train.rows(), config.use_covariates);
    const auto test_extra = extra_covariates(test.covariates, test.rows(), config.use_covariates);

    switch (config.scheme) {
    case SchemeKind::Unharmonized:
    case SchemeKind::WDH: {
        const auto model = predictors::train(spec, train.features, targets_of(train));
        return predict_with(model, test.features);
    }
    case SchemeKind::TTL: {
        const auto fitted = combat::fit_transform(train.features, train.sites,
                                                  hstack(encode_target_covariate(train.target, task), train_extra),
                                                  config.combat);
        const auto model = predictors::train(spec, fitted.adjusted, targets_of(train));
        const Eigen::MatrixXd test_cov = hstack(encode_target_covariate(test_targets.read(), task), test_extra);
        return predict_with(model, combat::transform(fitted.model, test.features, test.sites, test_cov));
    }
    case SchemeKind::NoTarget: {
        const auto fitted = combat::fit_transform(train.features, train.sites, train_extra, config.combat);
        const auto model = predictors::train(spec, fitted.adjusted, targets_of(train));
        return predict_with(model, combat::transform(fitted.model, test.features, test.sites, test_extra));
    }
    case SchemeKind::Pretty: {
        auto pc = config.pretty;
        pc.seed = seed::derive(fold_seed, "pretty");
        pc.combat = config.combat;
        pc.use_covariates = config.use_covariates;
        const auto model = pretty::fit(train, pc);
        const auto pred = pretty::predict(model, test);
        FoldOutput out;
        out.predictions = pred.predictions;
        out.scores = task.n_classes() == 2 ? Eigen::VectorXd(pred.scores.col(1)) : pred.predictions;
        return out;
    }
    }
    throw ConfigError("unhandled scheme");
}

FoldPlan experiment_folds(const Dataset& data, const ExperimentConfig& config)
{
    return make_folds(data, config.k, config.repeats, data.task.is_classification(), seed::derive(config.seed, "folds"));
}

ExperimentReport run_experiment(const Dataset& data, const ExperimentConfig& config)
{
    data.validate();
    config.validate(data.task);

    ExperimentReport report;
    report.scheme = config.scheme;
    report.leakage = has_leakage(config.scheme);
    report.seed = config.seed;

    LeakageAudit audit;
    const Dataset* source = &data;
    Dataset pooled;
    if (config.scheme == SchemeKind::WDH) {
        // Pooled harmonization sees every row's target, test folds included.
        audit.record();
        pooled = data;
        pooled.features = combat::fit_transform(
                              data.features, data.sites,
                              hstack(encode_target_covariate(data.target, data.task),
                                     extra_covariates(data.covariates, data.rows(), config.use_covariates)),
                              config.combat)
                              .adjusted;
        source = &pooled;
    }

    const FoldPlan plan = experiment_folds(data, config);
    const std::uint64_t scheme_seed = seed::derive(config.seed, "fold-models");
    report.folds.resize(plan.splits.size());

    parallel_for(plan.splits.size(), [&](std::size_t i) {
        const auto& split = plan.splits[i];
        const auto start = std::chrono::steady_clock::now();
        try {
            const Dataset train = subset(*source, split.train);
            const Dataset test = subset(*source, split.test);
            const TestTargetChannel channel(test.target, audit);
            FoldRecord rec;
            rec.fold = split.fold;
            rec.repeat = split.repeat;
            rec.test_indices = split.test;
            rec.output = run_fold(config, train, test.unlabeled(), channel, seed::derive(scheme_seed, i));
            rec.metrics = evaluate(data.task, test.target, rec.output, config.f1_positive);
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            report.folds[i] = std::move(rec);
        } catch (const Error& e) {
            rethrow_with_context(e, "repeat " + std::to_string(split.repeat) + " fold " + std::to_string(split.fold));
        }
    });

    for (const auto& name : metric_names(data.task)) {
        double s = 0.0;
        for (const auto& f : report.folds)
            s += f.metrics.at(name);
        report.aggregate[name] = s / static_cast<double>(report.folds.size());
    }
    report.audit_count = audit.count();
    if (!report.leakage && report.audit_count != 0)
        throw std::logic_error("leakage audit: scheme " + to_string(config.scheme) + " read test targets " +
                               std::to_string(report.audit_count) + " times");
    return report;
}

json ExperimentReport::to_json() const
{
    json folds_j = json::array();
    for (const auto& f : folds)
        folds_j.push_back({{"fold", f.fold}, {"repeat", f.repeat}, {"metrics", f.metrics}, {"seconds", f.seconds}});
    return {{"scheme", to_string(scheme)},
            {"leakage", leakage},
            {"seed", seed},
            {"folds", folds_j},
            {"aggregate", aggregate},
            {"audit", {{"test_target_transforms", audit_count}}}};
}

ComparisonTable compare_schemes(const Dataset& data, const std::vector<ExperimentConfig>& configs)
{
    if (configs.empty())
        throw ConfigError("compare_schemes: no scheme configurations given");
    for (const auto& c : configs)
        if (c.k != configs.front().k || c.repeats != configs.front().repeats || c.seed != configs.front().seed)
            throw ConfigError("compare_schemes: schemes must share k, repeats and seed so folds align (" +
                              to_string(c.scheme) + " differs)");
    ComparisonTable table;
    table.metric_names = metric_names(data.task);
    table.reports.resize(configs.size());
    parallel_for(configs.size(), [&](std::size_t i) { table.reports[i] = run_experiment(data, configs[i]); });
    return table;
}

std::string ComparisonTable::to_csv() const
{
    std::ostringstream os;
    os << "scheme,leakage";
    for (const auto& m : metric_names)
        os << ',' << m;
    os << '\n';
    for (const auto& r : reports) {
        os << to_string(r.scheme) << ',' << (r.leakage ? "true" : "false");
        for (const auto& m : metric_names)
            os << ',' << fixed(r.aggregate.at(m));
        os << '\n';
    }
    return os.str();
}

std::string ComparisonTable::to_text() const
{
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-16s %-8s", "scheme", "leakage");
    os << buf;
    for (const auto& m : metric_names) {
        std::snprintf(buf, sizeof buf, " %10s", m.c_str());
        os << buf;
    }
    os << '\n';
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%-16s %-8s", to_string(r.scheme).c_str(), r.leakage ? "yes" : "no");
        os << buf;
        for (const auto& m : metric_names) {
            std::snprintf(buf, sizeof buf, " %10.4f", r.aggregate.at(m));
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace harmony::schemes
