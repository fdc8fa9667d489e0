#include "harmony/error.hpp"
#include "harmony/parallel.hpp"
#include "harmony/predictors.hpp"
#include "harmony/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace harmony::predictors {

namespace {

/// Row order sorted lexicographically by (features..., target). Bootstrap
/// draws are defined on this order, so training is invariant to row permutation.
std::vector<int> canonical_order(const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    std::vector<int> order(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        for (Eigen::Index f = 0; f < X.cols(); ++f) {
            if (X(a, f) < X(b, f))
                return true;
            if (X(b, f) < X(a, f))
                return false;
        }
        return y[a] < y[b];
    });
    return order;
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double proxy = -std::numeric_limits<double>::infinity();
};

class TreeBuilder {
public:
    TreeBuilder(const ForestParams& params, bool classification, int n_outputs, int max_features,
                const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
        : params_(params), classification_(classification), k_(n_outputs), max_features_(max_features), X_(X), y_(y)
    {
    }

    Tree build(std::vector<int> idx, std::mt19937_64& rng)
    {
        Tree tree;
        struct Task {
            int node;
            std::size_t begin, end;
            int depth;
        };
        std::vector<Task> stack;
        tree.nodes.emplace_back();
        stack.push_back({0, 0, idx.size(), 0});
        buf_.resize(idx.size());
        counts_.assign(static_cast<std::size_t>(k_), 0.0);
        left_.assign(static_cast<std::size_t>(k_), 0.0);

        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            const std::size_t size = task.end - task.begin;

            Split split;
            const bool can_split = size >= static_cast<std::size_t>(params_.min_samples_split) &&
                                   size >= 2 * static_cast<std::size_t>(params_.min_samples_leaf) &&
                                   (params_.max_depth <= 0 || task.depth < params_.max_depth) &&
                                   !is_pure(idx, task.begin, task.end);
            if (can_split)
                split = best_split(idx, task.begin, task.end, rng);

            if (split.feature < 0) {
                make_leaf(tree, task.node, idx, task.begin, task.end);
                continue;
            }

            const auto mid_it = std::stable_partition(
                idx.begin() + static_cast<std::ptrdiff_t>(task.begin), idx.begin() + static_cast<std::ptrdiff_t>(task.end),
                [&](int r) { return X_(r, split.feature) <= split.threshold; });
            const auto mid = static_cast<std::size_t>(mid_it - idx.begin());

            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = left;
            node.right = left + 1;
            // Right pushed first so the left subtree is expanded first.
            stack.push_back({left + 1, mid, task.end, task.depth + 1});
            stack.push_back({left, task.begin, mid, task.depth + 1});
        }
        return tree;
    }

private:
    bool is_pure(const std::vector<int>& idx, std::size_t b, std::size_t e) const
    {
        const double first = y_[idx[b]];
        for (std::size_t i = b + 1; i < e; ++i)
            if (y_[idx[i]] != first)
                return false;
        return true;
    }

    void make_leaf(Tree& tree, int node, const std::vector<int>& idx, std::size_t b, std::size_t e) const
    {
        auto& n = tree.nodes[static_cast<std::size_t>(node)];
        n.feature = -1;
        n.value_offset = static_cast<int>(tree.values.size());
        const double size = static_cast<double>(e - b);
        if (classification_) {
            std::vector<double> freq(static_cast<std::size_t>(k_), 0.0);
            for (std::size_t i = b; i < e; ++i)
                freq[static_cast<std::size_t>(y_[idx[i]])] += 1.0;
            for (double f : freq)
                tree.values.push_back(f / size);
        } else if (is_pure(idx, b, e)) {
            tree.values.push_back(y_[idx[b]]);
        } else {
            double s = 0.0;
            for (std::size_t i = b; i < e; ++i)
                s += y_[idx[i]];
            tree.values.push_back(s / size);
        }
    }

    Split best_split(const std::vector<int>& idx, std::size_t b, std::size_t e, std::mt19937_64& rng)
    {
        const std::size_t size = e - b;
        const auto p = static_cast<int>(X_.cols());
        features_.resize(static_cast<std::size_t>(p));
        std::iota(features_.begin(), features_.end(), 0);

        // Node totals.
        double total_sum = 0.0;
        if (classification_) {
            std::fill(counts_.begin(), counts_.end(), 0.0);
            for (std::size_t i = b; i < e; ++i)
                counts_[static_cast<std::size_t>(y_[idx[i]])] += 1.0;
        } else {
            for (std::size_t i = b; i < e; ++i)
                total_sum += y_[idx[i]];
        }

        Split best;
        int visited = 0;
        const std::size_t min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        for (int drawn = 0; drawn < p; ++drawn) {
            if (visited >= max_features_ && best.feature >= 0)
                break;
            // Lazy Fisher-Yates: draw the next candidate without replacement.
            std::uniform_int_distribution<int> pick(drawn, p - 1);
            std::swap(features_[static_cast<std::size_t>(drawn)], features_[static_cast<std::size_t>(pick(rng))]);
            const int f = features_[static_cast<std::size_t>(drawn)];

            for (std::size_t i = 0; i < size; ++i) {
                const int r = idx[b + i];
                buf_[i] = {X_(r, f), r};
            }
            std::sort(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(size));
            if (buf_[0].first == buf_[size - 1].first)
                continue; // constant: not counted toward max_features
            ++visited;

            if (classification_)
                std::fill(left_.begin(), left_.end(), 0.0);
            double left_sum = 0.0;
            for (std::size_t i = 1; i < size; ++i) {
                const double yv = y_[buf_[i - 1].second];
                if (classification_)
                    left_[static_cast<std::size_t>(yv)] += 1.0;
                else
                    left_sum += yv;
                if (i < min_leaf || size - i < min_leaf)
                    continue;
                if (!(buf_[i - 1].first < buf_[i].first))
                    continue;
                const double nl = static_cast<double>(i);
                const double nr = static_cast<double>(size - i);
                double proxy = 0.0;
                if (classification_) {
                    double sl = 0.0, sr = 0.0;
                    for (int c = 0; c < k_; ++c) {
                        const double l = left_[static_cast<std::size_t>(c)];
                        const double r = counts_[static_cast<std::size_t>(c)] - l;
                        sl += l * l;
                        sr += r * r;
                    }
                    proxy = sl / nl + sr / nr;
                } else {
                    const double right_sum = total_sum - left_sum;
                    proxy = left_sum * left_sum / nl + right_sum * right_sum / nr;
                }
                if (proxy > best.proxy) {
                    best.proxy = proxy;
                    best.feature = f;
                    const double lo = buf_[i - 1].first;
                    const double hi = buf_[i].first;
                    double thr = lo / 2.0 + hi / 2.0;
                    if (!(thr < hi) || !(thr >= lo))
                        thr = lo;
                    best.threshold = thr;
                }
            }
        }
        return best;
    }

    const ForestParams& params_;
    bool classification_;
    int k_;
    int max_features_;
    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
    std::vector<std::pair<double, int>> buf_;
    std::vector<int> features_;
    std::vector<double> counts_;
    std::vector<double> left_;
};

const double* leaf_values(const Tree& tree, const Eigen::MatrixXd& X, Eigen::Index row)
{
    int node = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& n = tree.nodes[static_cast<std::size_t>(node)];
        node = X(row, n.feature) <= n.threshold ? n.left : n.right;
    }
    return tree.values.data() + tree.nodes[static_cast<std::size_t>(node)].value_offset;
}

} // namespace

ForestModel train_forest(const ForestParams& params, bool classification, const Eigen::MatrixXd& X, const Targets& y,
                         std::uint64_t seed)
{
    const Eigen::Index n = X.rows();
    const auto p = static_cast<int>(X.cols());
    if (n < 2)
        throw DataError("random forest needs at least 2 training rows");
    if (y.values.size() != n)
        throw DataError("target length does not match row count");
    if (p < 1)
        throw DataError("random forest needs at least one feature");

    int max_features = params.max_features;
    if (max_features <= 0)
        max_features = classification ? std::max(1, static_cast<int>(std::sqrt(static_cast<double>(p)))) : p;
    max_features = std::min(max_features, p);

    // Work in canonical row order.
    const auto order = canonical_order(X, y.values);
    Eigen::MatrixXd Xc(n, p);
    Eigen::VectorXd yc(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Xc.row(i) = X.row(order[static_cast<std::size_t>(i)]);
        yc[i] = y.values[order[static_cast<std::size_t>(i)]];
    }

    ForestModel model;
    model.classification = classification;
    model.n_outputs = classification ? y.n_classes : 1;
    model.trees.resize(static_cast<std::size_t>(params.n_trees));

    parallel_for(static_cast<std::size_t>(params.n_trees), [&](std::size_t t) {
        std::mt19937_64 rng(seed::derive(seed, static_cast<std::uint64_t>(t)));
        std::vector<int> idx(static_cast<std::size_t>(n));
        if (params.bootstrap) {
            std::uniform_int_distribution<int> draw(0, static_cast<int>(n) - 1);
            for (auto& v : idx)
                v = draw(rng);
        } else {
            std::iota(idx.begin(), idx.end(), 0);
        }
        TreeBuilder builder(params, classification, model.n_outputs, max_features, Xc, yc);
        model.trees[t] = builder.build(std::move(idx), rng);
    });
    return model;
}

Eigen::MatrixXd forest_scores(const ForestModel& model, const Eigen::MatrixXd& X)
{
    const Eigen::Index m = X.rows();
    const int k = model.n_outputs;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, k);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (const auto& tree : model.trees) {
            const double* v = leaf_values(tree, X, i);
            for (int c = 0; c < k; ++c)
                out(i, c) += v[c];
        }
    }
    out /= static_cast<double>(model.trees.size());
    return out;
}

} // namespace harmony::predictors
