// Sweeps generator effect sizes and reports the raw-feature random-forest
// balanced accuracy for each, to pick the defaults in synthgen.hpp.

#include "harmony/metrics.hpp"
#include "harmony/predictors.hpp"
#include "harmony/seed.hpp"
#include "harmony/synthgen.hpp"

#include "CLI11.hpp"

#include <cstdio>

using namespace harmony;

namespace {

double rf_bacc(const Dataset& d, std::uint64_t seed)
{
    const auto plan = make_folds(d, 5, 1, true, seed::derive(seed, "folds"));
    double total = 0.0;
    for (std::size_t i = 0; i < plan.splits.size(); ++i) {
        const auto& s = plan.splits[i];
        const Dataset tr = subset(d, s.train), te = subset(d, s.test);
        const auto spec = predictors::PredictorSpec::random_forest_classifier(seed::derive(seed, i));
        const auto m = predictors::train(spec, tr.features, {tr.target, 2});
        const auto p = predictors::predict(m, te.features);
        total += metrics::bacc(std::span(te.target.data(), te.target.size()), std::span(p.data(), p.size()), 2);
    }
    return total / static_cast<double>(plan.splits.size());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Generator effect-size calibration"};
    std::string form = "Simple";
    double lo = 0.25, hi = 1.5;
    int steps = 6;
    int replicates = 3;
    double goal = 80.0;
    app.add_option("--form", form, "Simple or Interaction");
    app.add_option("--min", lo, "Smallest effect size");
    app.add_option("--max", hi, "Largest effect size");
    app.add_option("--steps", steps, "Grid points")->check(CLI::PositiveNumber);
    app.add_option("--replicates", replicates, "Datasets per grid point")->check(CLI::PositiveNumber);
    app.add_option("--goal", goal, "Target balanced accuracy");
    CLI11_PARSE(app, argc, argv);

    synth::GenConfig g;
    g.signal = synth::Signal::TrueOnly;
    g.form = synth::form_from_string(form);

    double best = lo, best_gap = 1e300;
    std::printf("effect,bACC\n");
    for (int i = 0; i < steps; ++i) {
        const double effect = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
        g.effect_size = effect;
        double sum = 0.0;
        for (int r = 0; r < replicates; ++r) {
            g.seed = seed::derive(1000, static_cast<std::uint64_t>(r));
            sum += rf_bacc(synth::generate(g), g.seed);
        }
        const double mean = sum / replicates;
        std::printf("%.4f,%.2f\n", effect, mean);
        if (std::abs(mean - goal) < best_gap) {
            best_gap = std::abs(mean - goal);
            best = effect;
        }
    }
    std::printf("closest to %.1f: %.4f\n", goal, best);
    return 0;
}
