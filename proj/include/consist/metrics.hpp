#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "consist/consistency.hpp"
#include "consist/error.hpp"

namespace consist {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    double precision() const noexcept { return tp + fp ? double(tp) / double(tp + fp) : 0.0; }
    double recall() const noexcept { return tp + fn ? double(tp) / double(tp + fn) : 0.0; }
    double tpr() const noexcept { return recall(); }
    double fpr() const noexcept { return fp + tn ? double(fp) / double(fp + tn) : 0.0; }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Which side of the threshold counts as a positive prediction.
enum class ThresholdRule { at_least, above };

namespace detail {

inline void check_aligned(std::size_t scores, std::span<const std::uint8_t> labels) {
    if (scores != labels.size()) {
        throw UsageError("score/label length mismatch: " + std::to_string(scores) + " vs " +
                         std::to_string(labels.size()));
    }
    for (auto l : labels) {
        if (l > 1) {
            throw UsageError("labels must be 0 or 1");
        }
    }
}

}  // namespace detail

inline ConfusionCounts confusion_at_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                              double threshold, ThresholdRule rule = ThresholdRule::at_least) {
    detail::check_aligned(scores.size(), labels);
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = rule == ThresholdRule::at_least ? scores[i] >= threshold : scores[i] > threshold;
        if (labels[i]) {
            (predicted ? c.tp : c.fn)++;
        } else {
            (predicted ? c.fp : c.tn)++;
        }
    }
    return c;
}

enum class CurveKind { pr, roc };

struct CurvePoint {
    double threshold = 0.0;
    double x = 0.0;
    double y = 0.0;
};

/// PR curve: x = recall, y = precision, area = average precision.
/// ROC curve: x = FPR, y = TPR, area = trapezoidal AUROC.
struct Curve {
    CurveKind kind = CurveKind::pr;
    std::vector<CurvePoint> points;
    double area = 0.0;
    std::string rule;
};

inline constexpr std::string_view kAuprcRule = "average_precision_tie_grouped";
inline constexpr std::string_view kAurocRule = "trapezoid_tie_grouped";

/// Cumulative counts after each group of tied scores, highest scores first.
struct Sweep {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::vector<double> thresholds;
    std::vector<std::size_t> tp;
    std::vector<std::size_t> fp;
};

inline Sweep sweep(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    detail::check_aligned(scores.size(), labels);
    Sweep s;
    for (auto l : labels) {
        (l ? s.positives : s.negatives)++;
    }
    if (s.positives == 0 || s.negatives == 0) {
        throw EvaluationError("curve undefined: labels contain a single class");
    }
    for (double v : scores) {
        if (std::isnan(v)) {
            throw UsageError("scores contain NaN");
        }
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = scores[order[i]];
        while (i < order.size() && scores[order[i]] == t) {
            (labels[order[i]] ? tp : fp)++;
            ++i;
        }
        s.thresholds.push_back(t);
        s.tp.push_back(tp);
        s.fp.push_back(fp);
    }
    return s;
}

inline Curve pr_curve(const Sweep& s) {
    Curve c;
    c.kind = CurveKind::pr;
    c.rule = kAuprcRule;
    const double p = static_cast<double>(s.positives);
    auto precision = [&](std::size_t g) { return double(s.tp[g]) / double(s.tp[g] + s.fp[g]); };
    c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, precision(0)});
    double area = 0.0;
    double prev_recall = 0.0;
    for (std::size_t g = 0; g < s.thresholds.size(); ++g) {
        const double recall = double(s.tp[g]) / p;
        const double prec = precision(g);
        area += (recall - prev_recall) * prec;
        prev_recall = recall;
        c.points.push_back({s.thresholds[g], recall, prec});
    }
    c.area = area;
    return c;
}

inline Curve roc_curve(const Sweep& s) {
    Curve c;
    c.kind = CurveKind::roc;
    c.rule = kAurocRule;
    const double p = static_cast<double>(s.positives);
    const double n = static_cast<double>(s.negatives);
    c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    double area = 0.0;
    for (std::size_t g = 0; g < s.thresholds.size(); ++g) {
        const double x = double(s.fp[g]) / n;
        const double y = double(s.tp[g]) / p;
        const auto& prev = c.points.back();
        area += (x - prev.x) * (y + prev.y) * 0.5;
        c.points.push_back({s.thresholds[g], x, y});
    }
    c.area = area;
    return c;
}

inline Curve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    return pr_curve(sweep(scores, labels));
}

inline Curve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    return roc_curve(sweep(scores, labels));
}

namespace detail {

inline std::span<const double> outlier_direction(const ScoreVector& sv) {
    if (sv.direction != Direction::high_is_outlier) {
        throw UsageError("curves expect outlier scores (high_is_outlier)");
    }
    return sv.scores;
}

}  // namespace detail

inline Curve pr_curve(const ScoreVector& sv, std::span<const std::uint8_t> labels) {
    return pr_curve(detail::outlier_direction(sv), labels);
}

inline Curve roc_curve(const ScoreVector& sv, std::span<const std::uint8_t> labels) {
    return roc_curve(detail::outlier_direction(sv), labels);
}

/// CSV with columns threshold,recall,precision or threshold,fpr,tpr.
inline void write_curve_csv(std::ostream& out, const Curve& curve) {
    out << (curve.kind == CurveKind::pr ? "threshold,recall,precision\n" : "threshold,fpr,tpr\n");
    for (const auto& p : curve.points) {
        out << (std::isinf(p.threshold) ? std::string("inf") : detail::format_double(p.threshold)) << ','
            << detail::format_double(p.x) << ',' << detail::format_double(p.y) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Summaries over repetitions
// ---------------------------------------------------------------------------

struct Summary {
    double mean = 0.0;
    /// Sample standard deviation (n - 1 denominator); NaN for one value.
    double stddev = 0.0;
};

inline Summary summarize(std::span<const double> values, bool allow_single = false) {
    if (values.empty() || (values.size() < 2 && !allow_single)) {
        throw UsageError("standard deviation needs at least two values");
    }
    // shift by the first value so identical inputs give an exact zero spread
    const double origin = values.front();
    double shifted = 0.0;
    for (double v : values) {
        shifted += v - origin;
    }
    shifted /= static_cast<double>(values.size());
    Summary s;
    s.mean = origin + shifted;
    if (values.size() < 2) {
        s.stddev = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double ss = 0.0;
    for (double v : values) {
        const double d = (v - origin) - shifted;
        ss += d * d;
    }
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return s;
}

struct RepetitionMetrics {
    double auprc = 0.0;
    double auroc = 0.0;
};

struct MetricSummary {
    Summary auprc;
    Summary auroc;
};

inline MetricSummary summarize_runs(std::span<const RepetitionMetrics> reps, bool allow_single = false) {
    std::vector<double> pr;
    std::vector<double> roc;
    for (const auto& r : reps) {
        pr.push_back(r.auprc);
        roc.push_back(r.auroc);
    }
    return {summarize(pr, allow_single), summarize(roc, allow_single)};
}

}  // namespace consist
