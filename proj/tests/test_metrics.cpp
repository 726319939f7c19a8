#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "consist/metrics.hpp"

using namespace consist;

namespace {

const std::vector<double> kSixScores{.9, .8, .7, .6, .5, .4};
const std::vector<std::uint8_t> kSixLabels{1, 0, 1, 0, 0, 1};

// P(random positive outranks random negative), ties count half.
double mann_whitney(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    double wins = 0;
    double pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            pairs += 1;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

// Enumerate every distinct score as a ">=" cutoff, count by brute force, and
// sum precision times the recall gained at that cutoff.
double exhaustive_average_precision(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    std::set<double, std::greater<>> cutoffs(s.begin(), s.end());
    double positives = 0;
    for (auto l : y) positives += l;
    double prev_recall = 0;
    double ap = 0;
    for (double t : cutoffs) {
        double tp = 0, predicted = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= t) {
                predicted += 1;
                tp += y[i];
            }
        }
        const double recall = tp / positives;
        ap += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    return ap;
}

void random_instance(std::uint64_t seed, std::size_t n, std::vector<double>& s, std::vector<std::uint8_t>& y,
                     bool with_ties) {
    Engine e(seed);
    s.assign(n, 0.0);
    y.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = with_ties ? double(uniform_index(e, 5)) / 4.0 : uniform_unit(e);
        y[i] = uniform_unit(e) < 0.3;
    }
    y[0] = 1;
    y[1] = 0;
}

}  // namespace

TEST(Confusion, SimpleExample) {
    const std::vector<double> s{0.9, 0.1};
    const std::vector<std::uint8_t> y{1, 0};
    const auto c = confusion_at_threshold(s, y, 0.5);
    EXPECT_EQ(c, (ConfusionCounts{1, 0, 1, 0}));
}

TEST(Confusion, AllNegativeLabels) {
    const std::vector<double> s{0.9, 0.1, 0.5};
    const std::vector<std::uint8_t> y{0, 0, 0};
    for (double t : {-1.0, 0.5, 2.0}) {
        const auto c = confusion_at_threshold(s, y, t);
        EXPECT_EQ(c.tp, 0u);
        EXPECT_EQ(c.fn, 0u);
    }
}

TEST(Confusion, MatchesNaiveCounting) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    random_instance(4, 20, s, y, true);
    for (double t : {0.0, 0.25, 0.5, 0.6, 1.0}) {
        for (auto rule : {ThresholdRule::at_least, ThresholdRule::above}) {
            std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
            for (std::size_t i = 0; i < 20; ++i) {
                const bool hit = rule == ThresholdRule::at_least ? !(s[i] < t) : !(s[i] <= t);
                if (hit && y[i]) ++tp;
                if (hit && !y[i]) ++fp;
                if (!hit && !y[i]) ++tn;
                if (!hit && y[i]) ++fn;
            }
            const auto c = confusion_at_threshold(s, y, t, rule);
            EXPECT_EQ(c, (ConfusionCounts{tp, fp, tn, fn}));
            EXPECT_EQ(c.total(), 20u);
        }
    }
}

TEST(Confusion, LengthMismatch) {
    const std::vector<double> s{0.1, 0.2};
    const std::vector<std::uint8_t> y{1};
    EXPECT_THROW(confusion_at_threshold(s, y, 0.5), UsageError);
}

TEST(Curves, PerfectRanking) {
    const std::vector<double> s{0.9, 0.8, 0.3, 0.2, 0.1};
    const std::vector<std::uint8_t> y{1, 1, 0, 0, 0};
    EXPECT_EQ(pr_curve(s, y).area, 1.0);
    EXPECT_EQ(roc_curve(s, y).area, 1.0);
}

TEST(Curves, ConstantScoresGivePrevalenceAndHalf) {
    std::vector<double> s(1000, 0.42);
    std::vector<std::uint8_t> y(1000, 0);
    for (int i = 0; i < 17; ++i) y[i * 50] = 1;
    const auto pr = pr_curve(s, y);
    EXPECT_NEAR(pr.area, 17.0 / 1000.0, 1e-15);
    EXPECT_EQ(pr.points.size(), 2u);
    EXPECT_NEAR(roc_curve(s, y).area, 0.5, 1e-15);
}

TEST(Curves, ConstantScoresAtCreditCardPrevalence) {
    std::vector<double> s(284807, 0.0);
    std::vector<std::uint8_t> y(284807, 0);
    for (int i = 0; i < 492; ++i) y[i * 577] = 1;
    const double area = pr_curve(s, y).area;
    EXPECT_NEAR(area, 492.0 / 284807.0, 1e-15);
    EXPECT_NEAR(area, 0.00172, 1e-5);
}

TEST(Curves, SixPointInstance) {
    const auto pr = pr_curve(kSixScores, kSixLabels);
    const auto roc = roc_curve(kSixScores, kSixLabels);
    EXPECT_NEAR(pr.area, exhaustive_average_precision(kSixScores, kSixLabels), 1e-12);
    EXPECT_NEAR(pr.area, (1.0 + 2.0 / 3.0 + 0.5) / 3.0, 1e-12);
    EXPECT_NEAR(roc.area, mann_whitney(kSixScores, kSixLabels), 1e-12);
    EXPECT_NEAR(roc.area, 5.0 / 9.0, 1e-12);
    EXPECT_EQ(pr.rule, kAuprcRule);
    EXPECT_EQ(roc.rule, kAurocRule);
}

TEST(Curves, RandomInstancesMatchOracles) {
    for (std::uint64_t t = 0; t < 100; ++t) {
        std::vector<double> s;
        std::vector<std::uint8_t> y;
        random_instance(t, 10 + t, s, y, t % 2 == 0);
        EXPECT_NEAR(roc_curve(s, y).area, mann_whitney(s, y), 1e-10) << t;
        EXPECT_NEAR(pr_curve(s, y).area, exhaustive_average_precision(s, y), 1e-12) << t;
    }
}

TEST(Curves, AuprcInvariantUnderMonotoneTransform) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    random_instance(9, 200, s, y, true);
    std::vector<double> t(s.size());
    std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(3.0 * v) - 7.0; });
    EXPECT_EQ(pr_curve(s, y).area, pr_curve(t, y).area);
    EXPECT_EQ(roc_curve(s, y).area, roc_curve(t, y).area);
}

TEST(Curves, ReversalComplementsAuroc) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    random_instance(12, 300, s, y, true);
    std::vector<double> neg(s.size());
    std::transform(s.begin(), s.end(), neg.begin(), [](double v) { return -v; });
    EXPECT_NEAR(roc_curve(neg, y).area, 1.0 - roc_curve(s, y).area, 1e-15);
}

TEST(Curves, RecallEqualsTprAndAxesMonotone) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    random_instance(3, 150, s, y, true);
    const auto sw = sweep(s, y);
    const auto pr = pr_curve(sw);
    const auto roc = roc_curve(sw);
    ASSERT_EQ(pr.points.size(), roc.points.size());
    for (std::size_t i = 0; i < pr.points.size(); ++i) {
        EXPECT_EQ(pr.points[i].x, roc.points[i].y);
        if (i) {
            EXPECT_GE(pr.points[i].x, pr.points[i - 1].x);
            EXPECT_GE(roc.points[i].x, roc.points[i - 1].x);
            EXPECT_LT(pr.points[i].threshold, pr.points[i - 1].threshold);
        }
    }
    EXPECT_EQ(pr.points.front().y, pr.points[1].y);
}

TEST(Curves, SingleClassIsEvaluationError) {
    const std::vector<double> s{0.1, 0.2};
    const std::vector<std::uint8_t> ones{1, 1};
    const std::vector<std::uint8_t> zeros{0, 0};
    EXPECT_THROW(pr_curve(s, ones), EvaluationError);
    EXPECT_THROW(roc_curve(s, zeros), EvaluationError);
}

TEST(Curves, DirectionChecked) {
    ScoreVector sv;
    sv.scores = {0.1, 0.9};
    sv.direction = Direction::high_is_consistent;
    const std::vector<std::uint8_t> y{0, 1};
    EXPECT_THROW(pr_curve(sv, y), UsageError);
    sv.direction = Direction::high_is_outlier;
    EXPECT_EQ(roc_curve(sv, y).area, 1.0);
}

TEST(Curves, CsvLayout) {
    const std::vector<double> s{0.5, 0.25};
    const std::vector<std::uint8_t> y{1, 0};
    std::ostringstream pr;
    write_curve_csv(pr, pr_curve(s, y));
    EXPECT_EQ(pr.str(), "threshold,recall,precision\ninf,0,1\n0.5,1,1\n0.25,1,0.5\n");
    std::ostringstream roc;
    write_curve_csv(roc, roc_curve(s, y));
    EXPECT_EQ(roc.str(), "threshold,fpr,tpr\ninf,0,0\n0.5,0,1\n0.25,1,1\n");
}

TEST(Summarize, ClosedForms) {
    const std::vector<double> two{0.2, 0.4};
    const auto s = summarize(two);
    EXPECT_NEAR(s.mean, 0.3, 1e-15);
    EXPECT_NEAR(s.stddev, std::sqrt(0.02), 1e-15);
    const std::vector<double> same{0.7, 0.7, 0.7};
    EXPECT_EQ(summarize(same).stddev, 0.0);
}

TEST(Summarize, CreditCardAuprcColumnMean) {
    const std::vector<double> proposed{0.2822, 0.2327, 0.2417, 0.3584, 0.2743,
                                       0.2916, 0.2269, 0.2439, 0.2729, 0.2319};
    EXPECT_NEAR(summarize(proposed).mean, 0.2656, 5e-4);
}

TEST(Summarize, NeedsTwoValuesUnlessAllowed) {
    const std::vector<double> one{0.5};
    EXPECT_THROW(summarize(one), UsageError);
    const auto s = summarize(one, true);
    EXPECT_EQ(s.mean, 0.5);
    EXPECT_TRUE(std::isnan(s.stddev));
    const std::vector<RepetitionMetrics> reps{{0.2, 0.9}, {0.4, 0.7}};
    const auto m = summarize_runs(reps);
    EXPECT_NEAR(m.auprc.mean, 0.3, 1e-15);
    EXPECT_NEAR(m.auroc.mean, 0.8, 1e-15);
}
