#include "doctest.h"

#include "harmony/error.hpp"
#include "harmony/metrics.hpp"
#include "harmony/pretty.hpp"
#include "harmony/seed.hpp"

#include <random>
#include <set>

using namespace harmony;
using namespace harmony::pretty;

namespace {

/// Four sites, balanced classes, feature 0 separates the classes, no site effect.
Dataset separable(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Dataset d;
    d.task = TaskKind::classification({"A", "B"});
    d.features.resize(n, 3);
    d.target.resize(n);
    d.covariates.resize(n, 0);
    for (int i = 0; i < n; ++i) {
        const int cls = (i / 4) % 2;
        d.sites.push_back("s" + std::to_string(i % 4));
        d.target(i) = cls;
        d.features(i, 0) = (cls ? 2.0 : -2.0) + 0.3 * normal(rng);
        d.features(i, 1) = normal(rng);
        d.features(i, 2) = normal(rng);
    }
    d.feature_names = {"f1", "f2", "f3"};
    return d;
}

Dataset regression_data(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> age(20, 80);
    Dataset d;
    d.task = TaskKind::regression();
    d.features.resize(n, 4);
    d.target.resize(n);
    d.covariates.resize(n, 0);
    for (int i = 0; i < n; ++i) {
        const int s = i % 3;
        d.sites.push_back("site" + std::to_string(s));
        d.target(i) = age(rng);
        for (int f = 0; f < 4; ++f)
            d.features(i, f) = 0.05 * d.target(i) + normal(rng) + 0.5 * s;
    }
    d.feature_names = {"a", "b", "c", "d"};
    return d;
}

PrettyConfig quick_config(const TaskKind& task, std::uint64_t seed)
{
    auto c = PrettyConfig::defaults_for(task);
    c.predictive.forest.n_trees = 30;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("pretend values")
{
    const auto cls = TaskKind::classification({"F", "M"});
    CHECK(enumerate_pretend_values(Eigen::Vector3d(1, 0, 1), cls, 99) == std::vector<double>{0, 1});

    Eigen::VectorXd ages(3);
    ages << 80, 20, 50;
    CHECK(enumerate_pretend_values(ages, TaskKind::regression(), 4) == std::vector<double>{20, 40, 60, 80});

    ages << 18, 78, 30;
    const auto v = enumerate_pretend_values(ages, TaskKind::regression(), 10);
    REQUIRE(v.size() == 10);
    for (int i = 0; i < 10; ++i)
        CHECK(std::abs(v[static_cast<std::size_t>(i)] - (18.0 + i * (60.0 / 9.0))) < 1e-12);
    CHECK(v.front() == 18.0);
    CHECK(v.back() == 78.0);

    CHECK_THROWS_AS(enumerate_pretend_values(Eigen::Vector2d(5, 5), TaskKind::regression(), 4), DataError);
    CHECK_THROWS_AS(enumerate_pretend_values(ages, TaskKind::regression(), 1), ConfigError);
}

TEST_CASE("score matrix shape and constant propagation")
{
    const Dataset d = separable(200, 1);
    const auto model = fit(d, quick_config(d.task, 3));
    const std::vector<int> rows = [] {
        std::vector<int> r(100);
        for (int i = 0; i < 100; ++i)
            r[static_cast<std::size_t>(i)] = i;
        return r;
    }();
    const auto sm = build_score_matrix(model.final_combat, model.final_predictor, subset(d.unlabeled(), rows),
                                       model.pretend_values, d.task);
    CHECK(sm.values.rows() == 100);
    CHECK(sm.values.cols() == 2);
    CHECK(sm.pretend_values == model.pretend_values);

    // Single site, no EB, constant predictor.
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(20, 2);
    std::vector<std::string> sites(20, "only");
    Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(20, 0, 1);
    combat::CombatConfig cc;
    cc.use_eb = false;
    const auto cm = combat::fit(X, sites, y, cc);
    const auto constant = predictors::train(predictors::PredictorSpec::ridge_regression(),
                                            X, predictors::Targets{Eigen::VectorXd::Constant(20, 4.5), 0});
    const std::vector<double> pv = {0.0, 0.5, 1.0};
    const auto cs = build_score_matrix(cm, constant, UnlabeledData{X, sites, Eigen::MatrixXd(20, 0)}, pv,
                                       TaskKind::regression());
    CHECK((cs.values.array() - 4.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("score matrix rows are pure functions of their inputs")
{
    const Dataset d = separable(120, 2);
    const auto model = fit(d, quick_config(d.task, 4));
    std::vector<int> perm(120);
    for (int i = 0; i < 120; ++i)
        perm[static_cast<std::size_t>(i)] = (i * 7) % 120;
    const auto u = d.unlabeled();
    const auto a = build_score_matrix(model.final_combat, model.final_predictor, u, model.pretend_values, d.task);
    const auto b = build_score_matrix(model.final_combat, model.final_predictor, subset(u, perm),
                                      model.pretend_values, d.task);
    for (int i = 0; i < 120; ++i)
        CHECK(b.values.row(i) == a.values.row(perm[static_cast<std::size_t>(i)]));
}

TEST_CASE("out-of-sample score matrix bookkeeping")
{
    const Dataset d = separable(200, 5);
    const auto cfg = quick_config(d.task, 6);
    const auto model = fit(d, cfg);
    CHECK(model.oos_scores.rows() == 200);
    CHECK(model.oos_scores.cols() == 2);

    const auto plan = make_inner_folds(d, cfg.k_inner, seed::derive(cfg.seed, "inner-folds"));
    std::vector<int> seen(200, 0);
    for (const auto& split : plan.splits) {
        const std::set<int> train(split.train.begin(), split.train.end());
        for (int j : split.test) {
            ++seen[static_cast<std::size_t>(j)];
            CHECK(train.count(j) == 0);
        }
    }
    for (int c : seen)
        CHECK(c == 1);
}

TEST_CASE("separable fixture: stack fits and held-out accuracy is high")
{
    const Dataset all = separable(300, 7);
    std::vector<int> tr, te;
    for (int i = 0; i < 300; ++i)
        (i % 3 == 0 ? te : tr).push_back(i);
    const Dataset train = subset(all, tr);
    const Dataset test = subset(all, te);
    const auto model = fit(train, quick_config(train.task, 8));

    const auto stack_pred = predictors::predict(model.stack, model.oos_scores);
    const double stack_acc = (stack_pred.array() == train.target.array()).cast<double>().mean();
    CHECK(stack_acc >= 0.95);

    const auto pred = predict(model, test.unlabeled());
    const double bacc = metrics::bacc(std::span(test.target.data(), test.target.size()),
                                      std::span(pred.predictions.data(), pred.predictions.size()), 2);
    CHECK(bacc >= 90.0);
    CHECK((pred.scores.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("fit and predict are deterministic")
{
    const Dataset d = separable(160, 9);
    const auto cfg = quick_config(d.task, 10);
    const auto a = fit(d, cfg);
    const auto b = fit(d, cfg);
    CHECK(a.to_json().dump() == b.to_json().dump());
    const auto p1 = predict(a, d.unlabeled());
    const auto p2 = predict(a, d.unlabeled());
    CHECK(p1.predictions == p2.predictions);
    CHECK(p1.scores == p2.scores);

    const auto back = PrettyModel::from_json(nlohmann::json::parse(a.to_json().dump()));
    const auto p3 = predict(back, d.unlabeled());
    CHECK(p3.predictions == p1.predictions);
    CHECK(p3.scores == p1.scores);
}

TEST_CASE("regression pipeline")
{
    const Dataset d = regression_data(240, 11);
    auto cfg = quick_config(d.task, 12);
    cfg.n_pretend = 6;
    const auto model = fit(d, cfg);
    CHECK(model.pretend_values.size() == 6);
    CHECK(model.oos_scores.cols() == 6);
    const auto pred = predict(model, d.unlabeled());
    CHECK(pred.predictions.size() == 240);
    CHECK(pred.scores.cols() == 1);
    CHECK(pred.score_matrix.pretend_values == model.pretend_values);
    CHECK(metrics::r2(std::span(d.target.data(), d.target.size()),
                      std::span(pred.predictions.data(), pred.predictions.size())) > 0.3);
}

TEST_CASE("inner fold validation")
{
    Dataset d = separable(80, 13);
    d.sites[0] = "lonely";
    CHECK_THROWS_AS(make_inner_folds(d, 5, 1), DataError);
    try {
        make_inner_folds(d, 5, 1);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("lonely") != std::string::npos);
    }
}

TEST_CASE("unknown sites at predict time")
{
    const Dataset d = separable(120, 14);
    const auto model = fit(d, quick_config(d.task, 15));
    auto u = d.unlabeled();
    u.sites[3] = "elsewhere";
    CHECK_THROWS_AS(predict(model, u), DataError);
}

TEST_CASE("config validation")
{
    const auto cls = TaskKind::classification({"A", "B"});
    auto c = PrettyConfig::defaults_for(cls);
    CHECK(c.stack.kind == predictors::PredictorKind::Logistic);
    CHECK(PrettyConfig::defaults_for(TaskKind::regression()).stack.kind == predictors::PredictorKind::Ridge);
    c.k_inner = 1;
    CHECK_THROWS_AS(c.validate(cls), ConfigError);
    c = PrettyConfig::defaults_for(cls);
    c.explicit_pretend_values = {0, 1};
    CHECK_THROWS_AS(c.validate(cls), ConfigError);
    c = PrettyConfig::defaults_for(cls);
    c.stack = predictors::PredictorSpec::ridge_regression();
    CHECK_THROWS_AS(c.validate(cls), ConfigError);
    CHECK_THROWS_AS(PrettyConfig::from_json({{"k_inner", 3}, {"extra", true}}, cls), ConfigError);
    const auto back = PrettyConfig::from_json(PrettyConfig::defaults_for(cls).to_json(), cls);
    CHECK(back.k_inner == 5);
}
