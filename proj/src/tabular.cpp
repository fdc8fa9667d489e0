#include "harmony/tabular.hpp"

#include "harmony/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

namespace harmony {

TaskKind TaskKind::regression() { return TaskKind{}; }

TaskKind TaskKind::classification(std::vector<std::string> classes)
{
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.empty())
        throw ConfigError("classification task needs at least one class");
    TaskKind t;
    t.classes_ = std::move(classes);
    return t;
}

int TaskKind::class_index(const std::string& label) const
{
    auto it = std::lower_bound(classes_.begin(), classes_.end(), label);
    if (it == classes_.end() || *it != label) {
        std::string known;
        for (const auto& c : classes_)
            known += (known.empty() ? "" : ", ") + c;
        throw DataError("unseen class '" + label + "' (known classes: " + known + ")");
    }
    return static_cast<int>(it - classes_.begin());
}

std::string Dataset::target_label(Eigen::Index row) const
{
    if (task.is_classification())
        return task.classes().at(static_cast<std::size_t>(target[row]));
    return format_double(target[row]);
}

UnlabeledData Dataset::unlabeled() const { return UnlabeledData{features, sites, covariates}; }

void Dataset::validate() const
{
    const Eigen::Index n = rows();
    if (n == 0)
        throw DataError("empty dataset");
    if (static_cast<Eigen::Index>(sites.size()) != n || target.size() != n)
        throw DataError("row count mismatch between features, sites, and target");
    if (covariates.cols() > 0 && covariates.rows() != n)
        throw DataError("covariate row count mismatch");
    if (!features.allFinite())
        throw DataError("non-finite feature value");
    if (covariates.size() > 0 && !covariates.allFinite())
        throw DataError("non-finite covariate value");
    if (!target.allFinite())
        throw DataError("non-finite target value");

    std::map<std::string, int> counts;
    for (const auto& s : sites)
        ++counts[s];
    for (const auto& [site, c] : counts)
        if (c < 2)
            throw DataError("site '" + site + "' has " + std::to_string(c) +
                            " row(s); at least 2 are required");

    if (task.is_classification()) {
        std::set<int> seen;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = target[i];
            if (v < 0 || v >= task.n_classes() || v != std::floor(v))
                throw DataError("class index out of range at row " + std::to_string(i));
            seen.insert(static_cast<int>(v));
        }
        if (seen.size() < 2)
            throw DataError("classification target takes fewer than 2 distinct values");
    }
}

Dataset subset(const Dataset& data, std::span<const int> rows)
{
    Dataset out;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.features.resize(m, data.features.cols());
    out.target.resize(m);
    out.covariates.resize(data.covariates.cols() > 0 ? m : 0, data.covariates.cols());
    out.sites.reserve(rows.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        const int r = rows[static_cast<std::size_t>(i)];
        out.features.row(i) = data.features.row(r);
        out.target[i] = data.target[r];
        if (data.covariates.cols() > 0)
            out.covariates.row(i) = data.covariates.row(r);
        out.sites.push_back(data.sites[static_cast<std::size_t>(r)]);
    }
    out.feature_names = data.feature_names;
    out.covariate_names = data.covariate_names;
    out.task = data.task;
    return out;
}

UnlabeledData subset(const UnlabeledData& data, std::span<const int> rows)
{
    UnlabeledData out;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.features.resize(m, data.features.cols());
    out.covariates.resize(data.covariates.cols() > 0 ? m : 0, data.covariates.cols());
    out.sites.reserve(rows.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        const int r = rows[static_cast<std::size_t>(i)];
        out.features.row(i) = data.features.row(r);
        if (data.covariates.cols() > 0)
            out.covariates.row(i) = data.covariates.row(r);
        out.sites.push_back(data.sites[static_cast<std::size_t>(r)]);
    }
    return out;
}

std::vector<std::string> distinct_sites(std::span<const std::string> sites)
{
    std::vector<std::string> out(sites.begin(), sites.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<int> factorize(std::span<const std::string> keys)
{
    const auto levels = distinct_sites(keys);
    std::vector<int> ids;
    ids.reserve(keys.size());
    for (const auto& k : keys)
        ids.push_back(static_cast<int>(std::lower_bound(levels.begin(), levels.end(), k) - levels.begin()));
    return ids;
}

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------

int target_covariate_width(const TaskKind& task)
{
    return task.is_regression() ? 1 : std::max(1, task.n_classes() - 1);
}

Eigen::MatrixXd encode_target_covariate(const Eigen::VectorXd& target, const TaskKind& task)
{
    const Eigen::Index n = target.size();
    if (task.is_regression())
        return target;

    const int width = target_covariate_width(task);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, width);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = target[i];
        if (v < 0 || v >= task.n_classes() || v != std::floor(v))
            throw DataError("class index " + format_double(v) + " is not a known class");
        const int c = static_cast<int>(v);
        if (c > 0)
            out(i, c - 1) = 1.0;
    }
    return out;
}

Eigen::MatrixXd encode_target_labels(std::span<const std::string> labels, const TaskKind& task)
{
    Eigen::VectorXd idx(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (task.is_regression()) {
            double v = 0;
            const auto& s = labels[i];
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size())
                throw DataError("regression target '" + s + "' is not numeric");
            idx[static_cast<Eigen::Index>(i)] = v;
        } else {
            idx[static_cast<Eigen::Index>(i)] = task.class_index(labels[i]);
        }
    }
    return encode_target_covariate(idx, task);
}

} // namespace harmony
