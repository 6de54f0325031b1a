#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "error.hpp"

namespace iotgem {

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
};

/// Positive class is label 1.
inline ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) fail(errc::invalid_argument, "label vectors differ in length");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool t = y_true[i] != 0;
        const bool p = y_pred[i] != 0;
        if (t && p) ++cm.tp;
        else if (!t && p) ++cm.fp;
        else if (t) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

/// Cohen's kappa from a confusion matrix. Numerator and denominator are
/// formed in integers so the result is a single correctly-rounded division.
/// When chance agreement is 1 (both raters constant and equal) the value is 1.
inline double cohen_kappa(const ConfusionMatrix& cm) {
    if (cm.total() == 0) fail(errc::invalid_argument, "kappa of empty vectors");
    // kappa = (n·(tp+tn) − S) / (n² − S), with S = Σ_c true_c · predicted_c
    using wide = __int128;
    const wide n = static_cast<wide>(cm.total());
    const wide s = static_cast<wide>(cm.tp + cm.fp) * static_cast<wide>(cm.tp + cm.fn) +
                   static_cast<wide>(cm.fn + cm.tn) * static_cast<wide>(cm.fp + cm.tn);
    const wide den = n * n - s;
    if (den == 0) return 1.0;
    const wide num = n * static_cast<wide>(cm.tp + cm.tn) - s;
    return static_cast<double>(num) / static_cast<double>(den);
}

inline double cohen_kappa(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.empty()) fail(errc::invalid_argument, "kappa of empty vectors");
    return cohen_kappa(confusion(y_true, y_pred));
}

struct MetricBundle {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double kappa = 0.0;
    ConfusionMatrix cm;
};

namespace detail {

inline double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Zero-division conventions: precision, recall and F1 are 0 when undefined.
inline MetricBundle metric_bundle(const ConfusionMatrix& cm) {
    MetricBundle b;
    b.cm = cm;
    b.accuracy = detail::ratio(cm.tp + cm.tn, cm.total());
    b.precision = detail::ratio(cm.tp, cm.tp + cm.fp);
    b.recall = detail::ratio(cm.tp, cm.tp + cm.fn);
    b.f1 = cm.tp == 0 ? 0.0 : detail::ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
    b.kappa = cm.total() == 0 ? 0.0 : cohen_kappa(cm);
    return b;
}

inline MetricBundle metric_bundle(std::span<const int> y_true, std::span<const int> y_pred) {
    return metric_bundle(confusion(y_true, y_pred));
}

inline double f1_score(std::span<const int> y_true, std::span<const int> y_pred) {
    return metric_bundle(confusion(y_true, y_pred)).f1;
}

}  // namespace iotgem
