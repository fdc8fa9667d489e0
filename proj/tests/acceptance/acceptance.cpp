// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include "harmony/combat.hpp"
#include "harmony/metrics.hpp"
#include "harmony/predictors.hpp"
#include "harmony/schemes.hpp"
#include "harmony/seed.hpp"
#include "harmony/synthgen.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace harmony;
using schemes::SchemeKind;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

const std::vector<SchemeKind> kAllSchemes = {SchemeKind::Unharmonized, SchemeKind::WDH, SchemeKind::TTL,
                                             SchemeKind::NoTarget, SchemeKind::Pretty};

/// Test-target reads seen by leakage-free schemes across every experiment here.
int g_clean_audit = 0;
int g_clean_runs = 0;

schemes::ExperimentReport run(const Dataset& d, SchemeKind kind, std::uint64_t seed, int k, int repeats)
{
    auto c = schemes::ExperimentConfig::defaults_for(kind, d.task);
    c.k = k;
    c.repeats = repeats;
    c.seed = seed;
    auto r = schemes::run_experiment(d, c);
    if (!schemes::has_leakage(kind)) {
        g_clean_audit += r.audit_count;
        ++g_clean_runs;
    }
    return r;
}

// ---------------------------------------------------------------------------

Outcome combat_equalization()
{
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    synth::GenConfig g;
    g.signal = synth::Signal::EosOnly;
    g.seed = 2024;
    const Dataset d = synth::generate(g);
    combat::CombatConfig cc;
    cc.use_eb = false;
    const auto adjusted = combat::fit_transform(d.features, d.sites, Eigen::MatrixXd(d.rows(), 0), cc).adjusted;

    const auto site_ids = factorize(d.sites);
    const int S = *std::max_element(site_ids.begin(), site_ids.end()) + 1;
    double worst_mean = 0.0, worst_var = 0.0;
    for (Eigen::Index f = 0; f < adjusted.cols(); ++f) {
        std::vector<double> sum(static_cast<std::size_t>(S)), sq(static_cast<std::size_t>(S)), n(static_cast<std::size_t>(S));
        for (Eigen::Index i = 0; i < adjusted.rows(); ++i) {
            const auto s = static_cast<std::size_t>(site_ids[static_cast<std::size_t>(i)]);
            sum[s] += adjusted(i, f);
            n[s] += 1;
        }
        std::vector<double> mean(static_cast<std::size_t>(S)), var(static_cast<std::size_t>(S));
        for (int s = 0; s < S; ++s)
            mean[static_cast<std::size_t>(s)] = sum[static_cast<std::size_t>(s)] / n[static_cast<std::size_t>(s)];
        for (Eigen::Index i = 0; i < adjusted.rows(); ++i) {
            const auto s = static_cast<std::size_t>(site_ids[static_cast<std::size_t>(i)]);
            sq[s] += (adjusted(i, f) - mean[s]) * (adjusted(i, f) - mean[s]);
        }
        for (int s = 0; s < S; ++s)
            var[static_cast<std::size_t>(s)] = sq[static_cast<std::size_t>(s)] / n[static_cast<std::size_t>(s)];
        const auto [mlo, mhi] = std::minmax_element(mean.begin(), mean.end());
        const auto [vlo, vhi] = std::minmax_element(var.begin(), var.end());
        worst_mean = std::max(worst_mean, *mhi - *mlo);
        worst_var = std::max(worst_var, (*vhi - *vlo) / *vhi);
    }
    o.require(worst_mean <= 1e-8, "site means agree within 1e-8");
    o.require(worst_var <= 1e-6, "site variances agree within 1e-6 relative");
    o.note("max mean gap " + fmt("%.2e", worst_mean) + ", max variance gap " + fmt("%.2e", worst_var));

    // Predict the site from the features, before and after.
    auto site_bacc = [&](const Eigen::MatrixXd& X) {
        const auto plan = make_folds(X.rows(), site_ids, 5, 1, 7);
        Eigen::VectorXd y(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            y(i) = site_ids[static_cast<std::size_t>(i)];
        double total = 0.0;
        for (const auto& s : plan.splits) {
            Eigen::MatrixXd tr(static_cast<Eigen::Index>(s.train.size()), X.cols()),
                te(static_cast<Eigen::Index>(s.test.size()), X.cols());
            Eigen::VectorXd ytr(tr.rows()), yte(te.rows());
            for (std::size_t j = 0; j < s.train.size(); ++j) {
                tr.row(static_cast<Eigen::Index>(j)) = X.row(s.train[j]);
                ytr(static_cast<Eigen::Index>(j)) = y(s.train[j]);
            }
            for (std::size_t j = 0; j < s.test.size(); ++j) {
                te.row(static_cast<Eigen::Index>(j)) = X.row(s.test[j]);
                yte(static_cast<Eigen::Index>(j)) = y(s.test[j]);
            }
            const auto m = predictors::train(predictors::PredictorSpec::random_forest_classifier(11), tr, {ytr, S});
            const auto p = predictors::predict(m, te);
            total += metrics::bacc(view(yte), view(p), S);
        }
        return total / static_cast<double>(plan.splits.size());
    };
    const double before = site_bacc(d.features), after = site_bacc(adjusted);
    o.require(before >= 90.0, "site bACC before harmonization >= 90");
    o.require(after <= 55.0, "site bACC after harmonization <= 55");
    const double secs = seconds_since(start);
    o.require(secs < 30.0, "runtime < 30 s");
    o.note("site bACC " + fmt("%.1f", before) + " -> " + fmt("%.1f", after) + ", " + fmt("%.1f", secs) + " s");
    return o;
}

Outcome eb_fixed_point()
{
    Outcome o;
    synth::GenConfig g;
    g.signal = synth::Signal::EosOnly;
    g.seed = 77;
    const Dataset d = synth::generate(g);
    combat::CombatConfig cc;
    cc.tol = 1e-4;
    const auto model = combat::fit(d.features, d.sites, Eigen::MatrixXd(d.rows(), 0), cc);

    const auto site_ids = factorize(d.sites);
    double worst_g = 0.0, worst_d = 0.0;
    int cells = 0;
    for (std::size_t s = 0; s < model.sites().size(); ++s) {
        const auto& pr = model.priors()[s];
        if (pr.ig.degenerate) {
            o.require(false, "non-degenerate prior for site " + model.sites()[s].name);
            continue;
        }
        const int n = model.sites()[s].count;
        for (Eigen::Index f = 0; f < d.n_features(); ++f) {
            const double gs = model.gamma_star()(static_cast<Eigen::Index>(s), f);
            const double ds = model.delta_star2()(static_cast<Eigen::Index>(s), f);
            double ss = 0.0;
            for (Eigen::Index i = 0; i < d.rows(); ++i)
                if (site_ids[static_cast<std::size_t>(i)] == static_cast<int>(s)) {
                    const double z = (d.features(i, f) - model.alpha()(f)) / model.sigma()(f);
                    ss += (z - gs) * (z - gs);
                }
            const double g_eq = combat::eb_gamma_update(model.gamma_hat()(static_cast<Eigen::Index>(s), f),
                                                        pr.gamma_bar, pr.tau2, n, ds);
            const double d_eq = combat::eb_delta2_update(ss, n, pr.ig.lambda, pr.ig.theta);
            worst_g = std::max(worst_g, std::abs(g_eq - gs) / std::max(std::abs(gs), 1e-3));
            worst_d = std::max(worst_d, std::abs(d_eq - ds) / ds);
            ++cells;
        }
    }
    o.require(worst_g <= cc.tol, "gamma* update satisfied within tol");
    o.require(worst_d <= cc.tol, "delta*^2 update satisfied within tol");
    o.note(std::to_string(cells) + " cells, worst relative residual gamma " + fmt("%.1e", worst_g) + ", delta " +
           fmt("%.1e", worst_d));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    double worst_rt = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double m = u(rng), s2 = u(rng);
        const auto ig = combat::moment_match_inverse_gamma(m, s2);
        const double mean = ig.theta / (ig.lambda - 1.0);
        const double var = ig.theta * ig.theta / ((ig.lambda - 1.0) * (ig.lambda - 1.0) * (ig.lambda - 2.0));
        worst_rt = std::max({worst_rt, std::abs(mean - m) / m, std::abs(var - s2) / s2});
    }
    o.require(worst_rt <= 1e-12, "moment-match round trip within 1e-12 relative");
    o.note("round-trip worst " + fmt("%.1e", worst_rt));
    return o;
}

Outcome site_signal_pattern()
{
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    for (auto signal : {synth::Signal::EosOnly, synth::Signal::TrueOnly})
        for (auto form : {synth::Form::Simple, synth::Form::Interaction}) {
            synth::GenConfig g;
            g.signal = signal;
            g.form = form;
            g.seed = seed::derive(303, synth::to_string(signal) + synth::to_string(form));
            const Dataset d = synth::generate(g);
            const double base = run(d, SchemeKind::Unharmonized, 31, 5, 2).aggregate.at("bACC");
            const double pretty = run(d, SchemeKind::Pretty, 31, 5, 2).aggregate.at("bACC");
            const std::string name = synth::to_string(signal) + "/" + synth::to_string(form);
            if (signal == synth::Signal::EosOnly) {
                o.require(base >= 70.0, name + " baseline >= 70");
                o.require(pretty <= 60.0, name + " PrettYharmonize <= 60");
            } else {
                o.require(std::abs(pretty - base) <= 5.0, name + " |PrettYharmonize - baseline| <= 5");
            }
            o.note(name + " " + fmt("%.1f", base) + " vs " + fmt("%.1f", pretty));
        }
    const double secs = seconds_since(start);
    o.require(secs < 600.0, "runtime < 10 min");
    o.note(fmt("%.0f s", secs));
    return o;
}

Outcome dependence_collapse()
{
    Outcome o;
    synth::GenConfig g;
    g.target = synth::TargetKind::Age;
    g.signal = synth::Signal::Both;
    g.n_sites = 4;
    g.n_samples = 2000;
    g.seed = 404;
    synth::DependenceSpec spec;
    spec.balance_covariate = "sex";
    const Dataset d = synth::sample_dependence(synth::generate(g), spec, 405);

    std::map<SchemeKind, std::map<std::string, double>> agg;
    for (auto kind : {SchemeKind::NoTarget, SchemeKind::TTL, SchemeKind::WDH, SchemeKind::Pretty})
        agg[kind] = run(d, kind, 41, 5, 1).aggregate;
    const auto& nt = agg[SchemeKind::NoTarget];
    o.require(nt.at("R2") <= 0.05, "NoTarget R2 <= 0.05");
    o.require(nt.at("AgeBias") <= -0.9, "NoTarget age bias <= -0.9");
    for (auto kind : {SchemeKind::TTL, SchemeKind::WDH, SchemeKind::Pretty})
        o.require(agg[kind].at("R2") >= 0.5, schemes::to_string(kind) + " R2 >= 0.5");
    const double ratio = agg[SchemeKind::Pretty].at("MAE") / agg[SchemeKind::TTL].at("MAE");
    o.require(ratio <= 1.25, "PrettYharmonize MAE within 25% of TTL");
    for (const auto& [kind, m] : agg)
        o.note(schemes::to_string(kind) + " R2 " + fmt("%.3f", m.at("R2")) + " MAE " + fmt("%.2f", m.at("MAE")) +
               " bias " + fmt("%.3f", m.at("AgeBias")));
    return o;
}

Outcome independence_neutrality()
{
    Outcome o;
    auto compare = [&](const Dataset& d, const std::string& label, const std::string& metric, bool gate) {
        std::map<SchemeKind, double> v;
        for (auto kind : kAllSchemes)
            v[kind] = run(d, kind, 51, 5, 5).aggregate.at(metric);
        const double ref = v[SchemeKind::Unharmonized];
        std::string line = label + " " + metric + ":";
        for (auto kind : kAllSchemes) {
            const double rel = std::abs(v[kind] - ref) / std::abs(ref);
            if (gate)
                o.require(rel <= 0.05, label + " " + schemes::to_string(kind) + " within 5% of Unharmonized");
            line += " " + schemes::to_string(kind) + "=" + fmt("%.3f", v[kind]);
        }
        o.note(line);
    };
    auto data = [](synth::TargetKind target, double shift, double spread, std::uint64_t seed) {
        synth::GenConfig g;
        g.signal = synth::Signal::Both;
        g.target = target;
        g.n_sites = target == synth::TargetKind::Age ? 4 : 8;
        g.site_shift_scale = shift;
        g.site_scale_spread = spread;
        g.seed = seed;
        return synth::sample_independence(synth::generate(g), {}, seed::derive(seed, "sampling"));
    };

    // Gated: mild site effects, so any gap would come from the schemes themselves.
    compare(data(synth::TargetKind::Binary, 0.25, 0.1, 505), "binary", "AUC", true);
    compare(data(synth::TargetKind::Age, 0.25, 0.1, 507), "age", "MAE", true);
    // Reported only: strong site effects are pure noise here, and removing
    // them legitimately helps the harmonizing schemes.
    compare(data(synth::TargetKind::Binary, 1.0, 0.3, 505), "binary, strong site effects (not gated)", "AUC", false);
    return o;
}

Outcome leakage_audit()
{
    Outcome o;
    synth::GenConfig g;
    g.signal = synth::Signal::Both;
    g.seed = 606;
    synth::DependenceSpec spec;
    spec.minority_count = 10;
    const Dataset d = synth::sample_dependence(synth::generate(g), spec, 607);
    const auto plan = make_folds(d, 5, 1, true, 608);

    int changed_ttl = 0;
    for (const auto& split : plan.splits) {
        const Dataset train = subset(d, split.train), test = subset(d, split.test);
        Eigen::VectorXd permuted = test.target;
        std::mt19937_64 rng(seed::derive(609, static_cast<std::uint64_t>(split.fold)));
        std::shuffle(permuted.begin(), permuted.end(), rng);
        for (auto kind : {SchemeKind::TTL, SchemeKind::Unharmonized, SchemeKind::NoTarget, SchemeKind::Pretty}) {
            const auto cfg = schemes::ExperimentConfig::defaults_for(kind, d.task);
            schemes::LeakageAudit audit;
            const auto a = schemes::run_fold(cfg, train, test.unlabeled(), {test.target, audit}, 610);
            const auto b = schemes::run_fold(cfg, train, test.unlabeled(), {permuted, audit}, 610);
            const bool same = a.predictions == b.predictions && a.scores == b.scores;
            if (kind == SchemeKind::TTL) {
                changed_ttl += !same;
            } else {
                o.require(same, schemes::to_string(kind) + " predictions unchanged in fold " + std::to_string(split.fold));
                g_clean_audit += audit.count();
                ++g_clean_runs;
            }
        }
    }
    o.require(changed_ttl == static_cast<int>(plan.splits.size()), "TTL predictions change in every fold");
    o.note("TTL changed in " + std::to_string(changed_ttl) + "/" + std::to_string(plan.splits.size()) + " folds");
    return o;
}

Outcome metric_oracles()
{
    Outcome o;
    auto exact = [&](double got, double want, const std::string& what) {
        o.require(std::abs(got - want) <= 1e-12, what + " = " + fmt("%.15g", want) + " (got " + fmt("%.17g", got) + ")");
    };
    const std::vector<double> labels = {0, 0, 1, 1}, scores = {0.1, 0.4, 0.35, 0.8}, pred = {0, 1, 1, 1};
    exact(metrics::auc(labels, scores), 0.75, "auc");
    exact(metrics::bacc(labels, pred, 2), 75.0, "bacc");
    exact(metrics::f1(labels, pred, 1), 0.8, "f1");
    const std::vector<double> ages = {20, 35, 50, 65, 80}, flat(5, 42.0);
    exact(metrics::age_bias(ages, flat), -1.0, "age_bias constant");
    exact(metrics::r2(std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 4}), -1.0, "r2");
    o.note("auc, bacc, f1, age_bias, r2 exact");
    return o;
}

Outcome model_checks()
{
    Outcome o;
    std::mt19937_64 rng(808);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd X(60, 5);
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            X(i, j) = normal(rng);
    predictors::Targets y{Eigen::VectorXd(60), 2};
    for (Eigen::Index i = 0; i < 60; ++i)
        y.values(i) = X(i, 0) - X(i, 2) + 0.5 * normal(rng) > 0 ? 1.0 : 0.0;

    double worst_grad = 0.0;
    for (int point = 0; point < 20; ++point) {
        Eigen::VectorXd w(6);
        for (Eigen::Index i = 0; i < 6; ++i)
            w(i) = normal(rng);
        Eigen::VectorXd grad;
        predictors::logistic_objective(X, y, 0.5, w, &grad);
        for (Eigen::Index i = 0; i < 6; ++i) {
            const double h = 1e-5;
            Eigen::VectorXd a = w, b = w;
            a(i) += h;
            b(i) -= h;
            const double fd = (predictors::logistic_objective(X, y, 0.5, a, nullptr) -
                               predictors::logistic_objective(X, y, 0.5, b, nullptr)) / (2 * h);
            worst_grad = std::max(worst_grad, std::abs(fd - grad(i)) / std::max(std::abs(grad(i)), 1.0));
        }
    }
    o.require(worst_grad <= 1e-5, "logistic gradient within 1e-5 of central differences");

    Eigen::VectorXd target = X * Eigen::VectorXd::LinSpaced(5, -2, 2);
    for (Eigen::Index i = 0; i < 60; ++i)
        target(i) += normal(rng);
    const double alpha = 1.0;
    const auto rm = predictors::train_ridge({alpha}, X, target);
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const Eigen::VectorXd yc = target.array() - target.mean();
    const Eigen::VectorXd rhs = Xc.transpose() * yc;
    const double resid =
        ((Xc.transpose() * Xc + alpha * Eigen::MatrixXd::Identity(5, 5)) * rm.weights - rhs).norm() / rhs.norm();
    o.require(resid < 1e-8, "ridge normal-equation residual < 1e-8 relative");

    const auto spec = predictors::PredictorSpec::random_forest_classifier(809);
    const auto p1 = predictors::predict_scores(predictors::train(spec, X, y), X);
    const auto p2 = predictors::predict_scores(predictors::train(spec, X, y), X);
    o.require(p1 == p2, "random forest bit-identical across trainings");
    o.note("gradient " + fmt("%.1e", worst_grad) + ", ridge residual " + fmt("%.1e", resid));
    return o;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome cli_determinism()
{
    Outcome o;
    const fs::path dir = fs::temp_directory_path() / "harmony_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "run.toml") << "seed = 909\n"
                                       "[dataset.generate]\nsignal = \"Both\"\nn_samples = 400\nn_sites = 4\n"
                                       "[cv]\nk = 5\n";
    std::string csv[2];
    for (int i = 0; i < 2; ++i) {
        const fs::path out = dir / ("out" + std::to_string(i));
        const std::string cmd = std::string("\"") + HARMONY_CLI_PATH + "\" run --config \"" + (dir / "run.toml").string() +
                                "\" --out \"" + out.string() + "\" > /dev/null";
        const int status = std::system(cmd.c_str());
        o.require(WIFEXITED(status) && WEXITSTATUS(status) == 0, "run " + std::to_string(i + 1) + " exits 0");
        csv[i] = slurp(out / "comparison.csv");
    }
    o.require(!csv[0].empty(), "comparison CSV written");
    o.require(csv[0] == csv[1], "comparison CSVs byte-identical");
    o.note(std::to_string(csv[0].size()) + " bytes, identical: " + (csv[0] == csv[1] ? "yes" : "no"));
    return o;
}

} // namespace

int main()
{
    struct Criterion {
        const char* name;
        std::function<Outcome()> check;
    };
    const std::vector<Criterion> criteria = {
        {"ComBat equalization", combat_equalization},
        {"EB fixed point", eb_fixed_point},
        {"Site-signal removal", site_signal_pattern},
        {"No-Target collapse under dependence", dependence_collapse},
        {"Independence neutrality", independence_neutrality},
        {"Leakage audit", leakage_audit},
        {"Metric oracles", metric_oracles},
        {"Numerical model checks", model_checks},
        {"End-to-end determinism", cli_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (i == 5) {
            // The audit covers every experiment run so far, the permutation folds included.
            o.require(g_clean_audit == 0, "zero test-target reads by leakage-free schemes");
            o.note("audit " + std::to_string(g_clean_audit) + " over " + std::to_string(g_clean_runs) + " clean runs");
        }
        failed += !o.pass;
        std::printf("[%s] %zu. %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
