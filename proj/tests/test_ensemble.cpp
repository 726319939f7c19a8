#include <gtest/gtest.h>

#include <filesystem>

#include "consist/ensemble.hpp"

using namespace consist;

namespace {

// Three pairs: A near x=0, B near x=10, C near x=100.
LabeledDataset toy6() {
    return make_dataset(Matrix::from_rows({{0, 0}, {0, 1}, {10, 0}, {10, 1}, {100, 0}, {100, 1}}));
}

LabeledDataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
    Engine engine(seed);
    Matrix m(n, d);
    for (auto& x : m.values()) {
        x = uniform_unit(engine) * 4.0 - 2.0;
    }
    return make_dataset(std::move(m));
}

}  // namespace

TEST(KSchedule, RangeAndList) {
    EXPECT_EQ(KSchedule::range(2, 16).values().size(), 15u);
    EXPECT_EQ(KSchedule::range(2, 50, 2).values().back(), 50u);
    EXPECT_EQ(KSchedule::range(2, 9, 3).values(), (std::vector<std::size_t>{2, 5, 8}));
    EXPECT_THROW(KSchedule::range(2, 5, 0), ConfigError);
    EXPECT_THROW(KSchedule::range(6, 5), ConfigError);
}

TEST(KSchedule, Validation) {
    EXPECT_NO_THROW(KSchedule::list({2, 3}).validate(6));
    EXPECT_THROW(KSchedule::list({2}).validate(6), ConfigError);
    EXPECT_THROW(KSchedule::list({1, 2}).validate(6), ConfigError);
    EXPECT_THROW(KSchedule::list({2, 7}).validate(6), ConfigError);
    EXPECT_THROW(KSchedule::list({3, 3}).validate(6), ConfigError);
    EXPECT_THROW(KSchedule::list({0, 2}).validate(6, true), ConfigError);
    EXPECT_NO_THROW(KSchedule::list({1}).validate(6, true));
}

TEST(RunEnsemble, StructureOnToySet) {
    const auto ds = toy6();
    const auto er = run_ensemble(ds, KSchedule::list({2, 3}), 7);
    ASSERT_EQ(er.size(), 2u);
    EXPECT_EQ(er.runs[0].k, 2u);
    EXPECT_EQ(er.runs[1].k, 3u);
    for (std::size_t p = 0; p < 6; ++p) {
        EXPECT_EQ(er.signature(p).size(), 2u);
    }
    EXPECT_EQ(er.runs[0].seed, run_seed(7, 0));
    EXPECT_EQ(er.runs[1].seed, run_seed(7, 1));
    EXPECT_NE(er.runs[0].seed, er.runs[1].seed);
}

TEST(RunEnsemble, ToySignaturesMatchHandComputation) {
    // k=2: {A,B} with mean (5, 0.5) and size 4, {C} with mean (100, 0.5) and size 2.
    // k=3: A, B, C each of size 2 with means (0,.5), (10,.5), (100,.5).
    const auto er = run_ensemble(toy6(), KSchedule::list({2, 3}), 7);
    const double expected_k2[6][3] = {{5, .5, 4}, {5, .5, 4}, {5, .5, 4}, {5, .5, 4}, {100, .5, 2}, {100, .5, 2}};
    const double expected_k3[6][3] = {{0, .5, 2}, {0, .5, 2}, {10, .5, 2}, {10, .5, 2}, {100, .5, 2}, {100, .5, 2}};
    for (std::size_t p = 0; p < 6; ++p) {
        const auto sig = er.signature(p);
        EXPECT_NEAR(sig[0].centroid[0], expected_k2[p][0], 1e-12);
        EXPECT_NEAR(sig[0].centroid[1], expected_k2[p][1], 1e-12);
        EXPECT_EQ(sig[0].size, static_cast<std::size_t>(expected_k2[p][2]));
        EXPECT_NEAR(sig[1].centroid[0], expected_k3[p][0], 1e-12);
        EXPECT_NEAR(sig[1].centroid[1], expected_k3[p][1], 1e-12);
        EXPECT_EQ(sig[1].size, static_cast<std::size_t>(expected_k3[p][2]));
    }
    // points sharing all assignments share signatures
    const auto a = er.signature(0);
    const auto b = er.signature(1);
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_EQ(a[j].centroid.data(), b[j].centroid.data());
        EXPECT_EQ(a[j].size, b[j].size);
    }
}

TEST(RunEnsemble, DeterministicAndParallelMatchesSequential) {
    const auto ds = random_dataset(400, 4, 3);
    const auto schedule = KSchedule::range(2, 10);
    EnsembleOptions seq;
    seq.workers = 1;
    EnsembleOptions par;
    par.workers = 4;
    const auto a = run_ensemble(ds, schedule, 99, seq);
    const auto b = run_ensemble(ds, schedule, 99, seq);
    const auto c = run_ensemble(ds, schedule, 99, par);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_EQ(a.dataset_fingerprint, fingerprint(ds.features));
}

TEST(RunEnsemble, SignatureSizeMatchesRunSizes) {
    const auto ds = random_dataset(200, 3, 8);
    const auto er = run_ensemble(ds, KSchedule::range(2, 6), 1);
    for (std::size_t p = 0; p < ds.size(); ++p) {
        const auto sig = er.signature(p);
        for (std::size_t j = 0; j < er.size(); ++j) {
            const auto& run = er.runs[j];
            EXPECT_EQ(sig[j].size, run.sizes[run.assignments[p]]);
        }
    }
    for (const auto& run : er.runs) {
        std::size_t total = 0;
        for (auto s : run.sizes) total += s;
        EXPECT_EQ(total, ds.size());
    }
}

TEST(RunEnsemble, DegenerateOverride) {
    const auto ds = toy6();
    EXPECT_THROW(run_ensemble(ds, KSchedule::list({3}), 1), ConfigError);
    EnsembleOptions opts;
    opts.allow_degenerate = true;
    const auto er = run_ensemble(ds, KSchedule::list({3}), 1, opts);
    EXPECT_EQ(er.signature(4).size(), 1u);
}

TEST(RunEnsemble, SignatureIndexOutOfRange) {
    const auto er = run_ensemble(toy6(), KSchedule::list({2, 3}), 1);
    EXPECT_THROW(er.signature(6), UsageError);
}

TEST(RunEnsemble, FingerprintSensitiveToData) {
    auto ds = random_dataset(10, 2, 1);
    const auto before = fingerprint(ds.features);
    ds.features(3, 1) += 1e-12;
    EXPECT_NE(before, fingerprint(ds.features));
}

TEST(EnsembleFiles, SaveAndLoad) {
    const auto ds = random_dataset(60, 3, 2);
    const auto er = run_ensemble(ds, KSchedule::list({2, 4, 5}), 12);
    const auto dir = std::filesystem::temp_directory_path() / "consist_ensemble_io";
    std::filesystem::remove_all(dir);
    save_ensemble(dir, er);
    const auto back = load_ensemble(dir);
    EXPECT_EQ(back.schedule.values(), er.schedule.values());
    EXPECT_EQ(back.master_seed, er.master_seed);
    EXPECT_EQ(back.dataset_fingerprint, er.dataset_fingerprint);
    ASSERT_EQ(back.size(), er.size());
    for (std::size_t j = 0; j < er.size(); ++j) {
        EXPECT_EQ(back.runs[j].assignments, er.runs[j].assignments);
        EXPECT_EQ(back.runs[j].centroids, er.runs[j].centroids);
        EXPECT_EQ(back.runs[j].sizes, er.runs[j].sizes);
        EXPECT_EQ(back.runs[j].seed, er.runs[j].seed);
        EXPECT_EQ(back.runs[j].inertia, er.runs[j].inertia);
    }
}
