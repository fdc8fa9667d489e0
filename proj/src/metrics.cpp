#include "harmony/metrics.hpp"

#include "harmony/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace harmony::metrics {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, std::size_t min_len, const char* name)
{
    if (a.size() != b.size())
        throw DataError(std::string(name) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
    if (a.size() < min_len)
        throw DataError(std::string(name) + ": needs at least " + std::to_string(min_len) + " samples");
}

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

} // namespace

double mae(std::span<const double> y_true, std::span<const double> y_pred)
{
    check_lengths(y_true, y_pred, 1, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i)
        s += std::abs(y_true[i] - y_pred[i]);
    return s / static_cast<double>(y_true.size());
}

double r2(std::span<const double> y_true, std::span<const double> y_pred)
{
    check_lengths(y_true, y_pred, 2, "r2");
    const double m = mean(y_true);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
        ss_tot += (y_true[i] - m) * (y_true[i] - m);
    }
    if (ss_tot == 0.0)
        throw DataError("r2: y_true is constant");
    return 1.0 - ss_res / ss_tot;
}

double age_bias(std::span<const double> y_true, std::span<const double> y_pred)
{
    check_lengths(y_true, y_pred, 2, "age_bias");
    const std::size_t n = y_true.size();
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i)
        resid[i] = y_pred[i] - y_true[i];
    const double my = mean(y_true);
    const double mr = mean(resid);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = y_true[i] - my;
        const double dr = resid[i] - mr;
        sxy += dx * dr;
        sxx += dx * dx;
        syy += dr * dr;
    }
    if (syy == 0.0 || sxx == 0.0)
        return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double auc(std::span<const double> labels, std::span<const double> scores)
{
    check_lengths(labels, scores, 2, "auc");
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks over tie groups, then the rank-sum form of Mann-Whitney U.
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]])
            ++j;
        const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            const double l = labels[order[k]];
            if (l != 0.0 && l != 1.0)
                throw DataError("auc: labels must be 0 or 1");
            if (l == 1.0) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        }
        i = j + 1;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw DataError("auc: both classes must be present");
    const double np = static_cast<double>(n_pos);
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

double bacc(std::span<const double> y_true, std::span<const double> y_pred, int n_classes)
{
    check_lengths(y_true, y_pred, 1, "bacc");
    if (n_classes < 1)
        throw ConfigError("bacc: n_classes must be >= 1");
    std::vector<double> hit(static_cast<std::size_t>(n_classes), 0.0), total(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double c = y_true[i];
        if (c < 0 || c >= n_classes || c != std::floor(c))
            throw DataError("bacc: class index out of range");
        total[static_cast<std::size_t>(c)] += 1.0;
        if (y_pred[i] == c)
            hit[static_cast<std::size_t>(c)] += 1.0;
    }
    double s = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        if (total[static_cast<std::size_t>(c)] == 0.0)
            throw DataError("bacc: class " + std::to_string(c) + " has no true samples");
        s += hit[static_cast<std::size_t>(c)] / total[static_cast<std::size_t>(c)];
    }
    return 100.0 * s / static_cast<double>(n_classes);
}

double f1(std::span<const double> y_true, std::span<const double> y_pred, int positive)
{
    check_lengths(y_true, y_pred, 1, "f1");
    const double pos = positive;
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool t = y_true[i] == pos;
        const bool p = y_pred[i] == pos;
        tp += (t && p) ? 1.0 : 0.0;
        fp += (!t && p) ? 1.0 : 0.0;
        fn += (t && !p) ? 1.0 : 0.0;
    }
    const double precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    if (precision + recall == 0.0)
        return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

} // namespace harmony::metrics
