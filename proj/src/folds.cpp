#include "harmony/error.hpp"
#include "harmony/seed.hpp"
#include "harmony/tabular.hpp"

#include <algorithm>
#include <map>
#include <random>

namespace harmony {

FoldPlan make_folds(Eigen::Index n, std::span<const int> strata, int k, int repeats, std::uint64_t seed)
{
    if (k < 2)
        throw ConfigError("fold count k must be >= 2, got " + std::to_string(k));
    if (repeats < 1)
        throw ConfigError("repeat count must be >= 1, got " + std::to_string(repeats));
    if (n < k)
        throw DataError("cannot split " + std::to_string(n) + " rows into " + std::to_string(k) + " folds");
    if (!strata.empty() && static_cast<Eigen::Index>(strata.size()) != n)
        throw ConfigError("strata length does not match row count");

    FoldPlan plan;
    plan.k = k;
    plan.repeats = repeats;
    plan.seed = seed;
    plan.stratified = !strata.empty();

    for (int rep = 0; rep < repeats; ++rep) {
        std::mt19937_64 rng(seed::derive(seed, static_cast<std::uint64_t>(rep)));

        // Rows grouped by stratum (ascending stratum id), shuffled within each
        // group, then dealt round-robin: each stratum lands contiguously in the
        // deal order, so every fold gets floor or ceil of its share.
        std::map<int, std::vector<int>> groups;
        for (Eigen::Index i = 0; i < n; ++i)
            groups[strata.empty() ? 0 : strata[static_cast<std::size_t>(i)]].push_back(static_cast<int>(i));

        std::vector<int> order;
        order.reserve(static_cast<std::size_t>(n));
        for (auto& [id, rows] : groups) {
            std::shuffle(rows.begin(), rows.end(), rng);
            order.insert(order.end(), rows.begin(), rows.end());
        }

        std::vector<int> assignment(static_cast<std::size_t>(n));
        for (std::size_t pos = 0; pos < order.size(); ++pos)
            assignment[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k));

        for (int f = 0; f < k; ++f) {
            FoldSplit split;
            split.fold = f;
            split.repeat = rep;
            for (Eigen::Index i = 0; i < n; ++i)
                (assignment[static_cast<std::size_t>(i)] == f ? split.test : split.train).push_back(static_cast<int>(i));
            plan.splits.push_back(std::move(split));
        }
    }
    return plan;
}

FoldPlan make_folds(const Dataset& data, int k, int repeats, bool stratify, std::uint64_t seed)
{
    if (!stratify)
        return make_folds(data.rows(), {}, k, repeats, seed);

    if (!data.task.is_classification())
        throw ConfigError("stratified folds require a classification target");
    std::vector<int> labels(static_cast<std::size_t>(data.rows()));
    std::vector<int> counts(static_cast<std::size_t>(data.task.n_classes()), 0);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(data.target[i]);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] > 0 && counts[c] < k)
            throw DataError("class '" + data.task.classes()[c] + "' has " + std::to_string(counts[c]) +
                            " rows, fewer than k=" + std::to_string(k) + " required for stratification");
    return make_folds(data.rows(), labels, k, repeats, seed);
}

} // namespace harmony
