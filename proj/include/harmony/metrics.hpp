#pragma once

#include <span>

namespace harmony::metrics {

double mae(std::span<const double> y_true, std::span<const double> y_pred);

/// 1 - SS_res / SS_tot. Throws DataError for constant y_true.
double r2(std::span<const double> y_true, std::span<const double> y_pred);

/// Pearson correlation of y_true with (y_pred - y_true). Zero when the
/// residual has no variance.
double age_bias(std::span<const double> y_true, std::span<const double> y_pred);

/// Mann-Whitney AUC; ties count one half. Labels are 0/1.
double auc(std::span<const double> labels, std::span<const double> scores);

/// 100 x mean per-class recall over `n_classes` classes (class indices).
/// Every class must occur in y_true.
double bacc(std::span<const double> y_true, std::span<const double> y_pred, int n_classes);

/// 2PR / (P + R) for class index `positive`; 0 when P + R = 0.
double f1(std::span<const double> y_true, std::span<const double> y_pred, int positive);

} // namespace harmony::metrics
