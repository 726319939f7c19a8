#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "consist/analysis.hpp"

using namespace consist;

namespace {

// Textbook silhouette: plain loops, Euclidean distance via hypot-style sums.
double silhouette_oracle(const Matrix& x, const std::vector<std::uint32_t>& a, std::size_t k) {
    const std::size_t n = x.rows();
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> sum(k, 0.0);
        std::vector<double> cnt(k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double dd = 0;
            for (std::size_t t = 0; t < x.cols(); ++t) dd += (x(i, t) - x(j, t)) * (x(i, t) - x(j, t));
            sum[a[j]] += std::sqrt(dd);
            cnt[a[j]] += 1;
        }
        if (cnt[a[i]] == 0) continue;  // singleton
        const double ai = sum[a[i]] / cnt[a[i]];
        double bi = 1e300;
        for (std::size_t c = 0; c < k; ++c) {
            if (c != a[i] && cnt[c] > 0) bi = std::min(bi, sum[c] / cnt[c]);
        }
        const double m = std::max(ai, bi);
        total += m > 0 ? (bi - ai) / m : 0.0;
    }
    return total / double(n);
}

}  // namespace

TEST(Silhouette, SeparatedBlobs) {
    Engine e(1);
    Matrix m(40, 2);
    std::vector<std::uint32_t> a(40);
    for (std::size_t i = 0; i < 40; ++i) {
        const double base = i < 20 ? 0.0 : 10.0;
        m(i, 0) = base + 0.2 * uniform_unit(e);
        m(i, 1) = base + 0.2 * uniform_unit(e);
        a[i] = i < 20 ? 0 : 1;
    }
    EXPECT_GT(silhouette(m, a, 2), 0.9);
}

TEST(Silhouette, IdenticalPointsNearZero) {
    const Matrix m(6, 2);
    const std::vector<std::uint32_t> a{0, 1, 0, 1, 0, 1};
    EXPECT_NEAR(silhouette(m, a, 2), 0.0, 1e-12);
}

TEST(Silhouette, EightPointOracle) {
    const auto m = Matrix::from_rows(
        {{0, 0}, {1, 0}, {0, 2}, {5, 5}, {6, 5}, {5, 7}, {9, 0}, {3, 3}});
    const std::vector<std::uint32_t> a{0, 0, 0, 1, 1, 1, 2, 1};
    EXPECT_NEAR(silhouette(m, a, 3), silhouette_oracle(m, a, 3), 1e-10);
}

TEST(Silhouette, RandomOracleAndRelabelInvariance) {
    for (std::uint64_t t = 0; t < 20; ++t) {
        Engine e(t);
        const std::size_t n = 10 + uniform_index(e, 40);
        const std::size_t k = 2 + uniform_index(e, 4);
        Matrix m(n, 3);
        for (auto& x : m.values()) x = uniform_unit(e);
        std::vector<std::uint32_t> a(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<std::uint32_t>(i < k ? i : uniform_index(e, k));
        const double s = silhouette(m, a, k, kDefaultSilhouetteCap, 1 + t % 3);
        EXPECT_NEAR(s, silhouette_oracle(m, a, k), 1e-10);
        std::vector<std::uint32_t> renamed(n);
        for (std::size_t i = 0; i < n; ++i) renamed[i] = static_cast<std::uint32_t>(k - 1 - a[i]);
        EXPECT_NEAR(silhouette(m, renamed, k), s, 1e-12);
        EXPECT_GE(s, -1.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(Silhouette, Errors) {
    const Matrix m(5, 2);
    const std::vector<std::uint32_t> one(5, 0);
    EXPECT_THROW(silhouette(m, one, 1), UsageError);
    const std::vector<std::uint32_t> a{0, 1, 0, 1, 0};
    EXPECT_THROW(silhouette(m, a, 2, 4), CapacityError);
    EXPECT_THROW(silhouette(m, a, 3), UsageError);  // empty cluster 2
}

TEST(VarianceShare, EqualVariances) {
    const auto m = Matrix::from_rows({{1, 5, -3}, {3, 7, -1}});
    for (double v : variance_share(m)) {
        EXPECT_NEAR(v, 100.0 / 3.0, 1e-12);
    }
}

TEST(VarianceShare, TwoPassOracle) {
    const auto m = Matrix::from_rows({{1, 10, 0.5}, {2, 30, 0.25}, {4, 20, 0.0}, {8, 60, 1.0}});
    std::vector<double> var(3, 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < 4; ++i) mean += m(i, j) / 4.0;
        for (std::size_t i = 0; i < 4; ++i) var[j] += (m(i, j) - mean) * (m(i, j) - mean) / 3.0;
    }
    const double total = var[0] + var[1] + var[2];
    const auto got = variance_share(m);
    double sum = 0;
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(got[j], 100.0 * var[j] / total, 1e-10);
        sum += got[j];
    }
    EXPECT_NEAR(sum, 100.0, 1e-9);
}

TEST(VarianceShare, ColumnPermutationPermutesOutput) {
    Engine e(5);
    Matrix m(50, 4);
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t j = 0; j < 4; ++j) m(i, j) = uniform_unit(e) * double(j + 1);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    Matrix p(50, 4);
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t j = 0; j < 4; ++j) p(i, j) = m(i, perm[j]);
    const auto a = variance_share(m);
    const auto b = variance_share(p);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(b[j], a[perm[j]], 1e-10);
    EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 100.0, 1e-9);
}

TEST(VarianceShare, NeedsTwoRows) {
    EXPECT_THROW(variance_share(Matrix(1, 3)), UsageError);
}

TEST(PurityTable, Examples) {
    ScoreVector sv;
    sv.direction = Direction::high_is_consistent;
    sv.scores = {0.9, 0.3};
    const std::vector<std::uint8_t> y{0, 1};
    const std::vector<double> t{0.5};
    const auto rows = purity_table(sv, y, t);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].tn_above, 1u);
    EXPECT_EQ(rows[0].tp_above, 0u);
    EXPECT_TRUE(purity_table(sv, y, std::vector<double>{}).empty());
    sv.direction = Direction::high_is_outlier;
    EXPECT_THROW(purity_table(sv, y, t), UsageError);
}

TEST(PurityTable, MonotoneInThreshold) {
    Engine e(2);
    ScoreVector sv;
    sv.direction = Direction::high_is_consistent;
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 500; ++i) {
        sv.scores.push_back(uniform_unit(e));
        y.push_back(uniform_unit(e) < 0.1);
    }
    const std::vector<double> t{0.5, 0.6, 0.7, 0.8, 0.9};
    const auto rows = purity_table(sv, y, t);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        EXPECT_LE(rows[r].tn_above, rows[r - 1].tn_above);
        EXPECT_LE(rows[r].tp_above, rows[r - 1].tp_above);
    }
}
