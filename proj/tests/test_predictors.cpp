#include "doctest.h"

#include "harmony/error.hpp"
#include "harmony/predictors.hpp"

#include <random>

using namespace harmony;
using namespace harmony::predictors;

namespace {

Eigen::MatrixXd random_matrix(int n, int p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd X(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i)
            X(i, j) = normal(rng);
    return X;
}

Targets binary_targets(const Eigen::MatrixXd& X)
{
    Targets t;
    t.n_classes = 2;
    t.values.resize(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        t.values(i) = X(i, 0) + 0.5 * X(i, 1) > 0 ? 1.0 : 0.0;
    return t;
}

} // namespace

TEST_CASE("ridge recovers an exact linear fit")
{
    Eigen::MatrixXd X(5, 1);
    X << 1, 2, 3, 4, 5;
    Eigen::VectorXd y = 3.0 * X.col(0);
    const auto m = train_ridge({1e-12}, X, y);
    CHECK(m.weights(0) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(std::abs(m.intercept) < 1e-6);
}

TEST_CASE("ridge satisfies its normal equations")
{
    const Eigen::MatrixXd X = random_matrix(80, 6, 3);
    Eigen::VectorXd y = X * Eigen::VectorXd::LinSpaced(6, -1, 1) + random_matrix(80, 1, 4).col(0);
    const double alpha = 1.0;
    const auto m = train_ridge({alpha}, X, y);
    // Intercept is unpenalized: the solve works on centered data.
    const Eigen::RowVectorXd mu = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - mu;
    const Eigen::VectorXd yc = y.array() - y.mean();
    const Eigen::VectorXd lhs = (Xc.transpose() * Xc + alpha * Eigen::MatrixXd::Identity(6, 6)) * m.weights;
    const Eigen::VectorXd rhs = Xc.transpose() * yc;
    CHECK((lhs - rhs).norm() < 1e-8 * rhs.norm());
}

TEST_CASE("logistic separates a linearly separable 4-point set")
{
    Eigen::MatrixXd X(4, 2);
    X << -2, -1, -1, -2, 1, 2, 2, 1;
    Targets y{Eigen::Vector4d(0, 0, 1, 1), 2};
    const auto model = train(PredictorSpec::logistic_regression(0.01), X, y);
    const auto& lm = std::get<LogisticModel>(model.params());
    // Oracle: sign of the decision function on each point.
    for (int i = 0; i < 4; ++i) {
        const double margin = X.row(i).dot(lm.weights.row(0)) + lm.intercepts(0);
        CHECK((margin > 0) == (y.values(i) == 1.0));
    }
    CHECK(predict(model, X) == y.values);
    CHECK(lm.grad_norm < 1e-6);
}

TEST_CASE("logistic with zero weights gives exactly one half")
{
    LogisticModel lm;
    lm.weights = Eigen::MatrixXd::Zero(1, 3);
    lm.intercepts = Eigen::VectorXd::Zero(1);
    const auto s = logistic_scores(lm, random_matrix(5, 3, 1));
    for (int i = 0; i < 5; ++i) {
        CHECK(s(i, 0) == 0.5);
        CHECK(s(i, 1) == 0.5);
    }
}

TEST_CASE("logistic gradient matches central differences")
{
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal;
    const Eigen::MatrixXd X = random_matrix(40, 4, 5);
    SUBCASE("binary")
    {
        const Targets y = binary_targets(X);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd w(5);
            for (int i = 0; i < 5; ++i)
                w(i) = normal(rng);
            Eigen::VectorXd g;
            logistic_objective(X, y, 0.7, w, &g);
            for (int i = 0; i < 5; ++i) {
                const double h = 1e-5;
                Eigen::VectorXd a = w, b = w;
                a(i) += h;
                b(i) -= h;
                const double fd = (logistic_objective(X, y, 0.7, a, nullptr) -
                                   logistic_objective(X, y, 0.7, b, nullptr)) / (2 * h);
                CHECK(std::abs(fd - g(i)) <= 1e-5 * std::max(1.0, std::abs(g(i))));
            }
        }
    }
    SUBCASE("multinomial")
    {
        Targets y;
        y.n_classes = 3;
        y.values.resize(40);
        for (int i = 0; i < 40; ++i)
            y.values(i) = i % 3;
        Eigen::VectorXd w(15);
        for (int i = 0; i < 15; ++i)
            w(i) = normal(rng);
        Eigen::VectorXd g;
        logistic_objective(X, y, 0.3, w, &g);
        for (int i = 0; i < 15; ++i) {
            const double h = 1e-5;
            Eigen::VectorXd a = w, b = w;
            a(i) += h;
            b(i) -= h;
            const double fd =
                (logistic_objective(X, y, 0.3, a, nullptr) - logistic_objective(X, y, 0.3, b, nullptr)) / (2 * h);
            CHECK(std::abs(fd - g(i)) <= 1e-5 * std::max(1.0, std::abs(g(i))));
        }
    }
}

TEST_CASE("random forest is deterministic per seed")
{
    const Eigen::MatrixXd X = random_matrix(150, 5, 11);
    const Targets y = binary_targets(X);
    const auto spec = PredictorSpec::random_forest_classifier(42);
    const auto a = predict_scores(train(spec, X, y), X);
    const auto b = predict_scores(train(spec, X, y), X);
    CHECK(a == b);
    auto other = spec;
    other.seed = 43;
    CHECK(predict_scores(train(other, X, y), X) != a);
}

TEST_CASE("random forest regression on a constant target")
{
    const Eigen::MatrixXd X = random_matrix(50, 3, 2);
    Targets y{Eigen::VectorXd::Constant(50, 7.25), 0};
    const auto m = train(PredictorSpec::random_forest_regressor(1), X, y);
    const auto pred = predict(m, random_matrix(20, 3, 8));
    for (Eigen::Index i = 0; i < pred.size(); ++i)
        CHECK(pred(i) == 7.25);
}

TEST_CASE("classifier probabilities sum to one")
{
    const Eigen::MatrixXd X = random_matrix(120, 4, 21);
    Targets y;
    y.n_classes = 3;
    y.values.resize(120);
    for (int i = 0; i < 120; ++i)
        y.values(i) = X(i, 0) > 0.5 ? 2 : (X(i, 0) > -0.5 ? 1 : 0);
    const Eigen::MatrixXd probe = random_matrix(1000, 4, 22);
    for (const auto& spec : {PredictorSpec::random_forest_classifier(3), PredictorSpec::logistic_regression()}) {
        const auto s = predict_scores(train(spec, X, y), probe);
        REQUIRE(s.cols() == 3);
        CHECK((s.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
        CHECK(s.minCoeff() >= 0.0);
        CHECK(s.maxCoeff() <= 1.0);
    }
}

TEST_CASE("random forest is invariant to training-row order")
{
    const Eigen::MatrixXd X = random_matrix(90, 4, 31);
    const Targets y = binary_targets(X);
    std::vector<int> perm(90);
    for (int i = 0; i < 90; ++i)
        perm[static_cast<std::size_t>(i)] = (i * 37) % 90;
    Eigen::MatrixXd Xp(90, 4);
    Targets yp{Eigen::VectorXd(90), 2};
    for (int i = 0; i < 90; ++i) {
        Xp.row(i) = X.row(perm[static_cast<std::size_t>(i)]);
        yp.values(i) = y.values(perm[static_cast<std::size_t>(i)]);
    }
    const auto spec = PredictorSpec::random_forest_classifier(5);
    const auto probe = random_matrix(40, 4, 32);
    CHECK(predict_scores(train(spec, X, y), probe) == predict_scores(train(spec, Xp, yp), probe));
}

TEST_CASE("training and prediction errors")
{
    const Eigen::MatrixXd X = random_matrix(10, 2, 1);
    Targets one{Eigen::VectorXd::Zero(10), 2};
    CHECK_THROWS_AS(train(PredictorSpec::logistic_regression(), X, one), DataError);
    CHECK_THROWS_AS(train(PredictorSpec::random_forest_classifier(), X, one), DataError);
    Eigen::MatrixXd bad = X;
    bad(3, 1) = std::nan("");
    CHECK_THROWS_AS(train(PredictorSpec::ridge_regression(), bad, Targets{Eigen::VectorXd::Ones(10), 0}), DataError);
    const auto m = train(PredictorSpec::ridge_regression(), X, Targets{X.col(0), 0});
    CHECK_THROWS_AS(predict(m, random_matrix(3, 5, 1)), DataError);
}

TEST_CASE("spec validation and JSON")
{
    auto spec = PredictorSpec::random_forest_classifier(9);
    spec.forest.n_trees = 0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    CHECK_THROWS_AS(PredictorSpec::from_json({{"kind", "ridge"}, {"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(PredictorSpec::from_json({{"kind", "Nope"}}), ConfigError);
    const auto back = PredictorSpec::from_json(PredictorSpec::ridge_regression(2.5).to_json());
    CHECK(back.kind == PredictorKind::Ridge);
    CHECK(back.ridge.alpha == 2.5);
}

TEST_CASE("fitted predictors round-trip through JSON")
{
    const Eigen::MatrixXd X = random_matrix(60, 3, 41);
    const Targets y = binary_targets(X);
    for (const auto& spec : {PredictorSpec::random_forest_classifier(1), PredictorSpec::logistic_regression()}) {
        const auto m = train(spec, X, y);
        const auto back = FittedPredictor::from_json(nlohmann::json::parse(m.to_json().dump()));
        CHECK(predict_scores(back, X) == predict_scores(m, X));
    }
    const auto r = train(PredictorSpec::ridge_regression(), X, Targets{X.col(1), 0});
    CHECK(predict(FittedPredictor::from_json(nlohmann::json::parse(r.to_json().dump())), X) == predict(r, X));
}
