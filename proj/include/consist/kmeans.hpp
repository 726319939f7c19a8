#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "consist/dataset.hpp"
#include "consist/error.hpp"
#include "consist/matrix.hpp"
#include "consist/parallel.hpp"
#include "consist/random.hpp"

namespace consist {

enum class Init { kmeanspp, random_points };

inline std::string_view to_string(Init init) noexcept {
    return init == Init::kmeanspp ? "kmeanspp" : "random_points";
}

inline Init parse_init(std::string_view name) {
    if (name == "kmeanspp" || name == "kmeans++") return Init::kmeanspp;
    if (name == "random_points" || name == "random") return Init::random_points;
    throw ConfigError("unknown k-means initialization '" + std::string(name) + "'");
}

struct KMeansConfig {
    std::size_t max_iterations = 300;
    /// Convergence threshold on the largest squared centroid shift.
    double tolerance = 1e-4;
    Init init = Init::kmeanspp;
    /// Threads used for the assignment step of a single fit.
    std::size_t workers = 1;
};

/// Result of one Lloyd fit. Centroids are the exact means of their
/// assigned points; `inertia_trace` holds the objective after every
/// assignment step followed by the final value.
struct ClusteringRun {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> assignments;
    Matrix centroids;
    std::vector<std::size_t> sizes;
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> inertia_trace;
    std::size_t empty_cluster_repairs = 0;

    friend bool operator==(const ClusteringRun&, const ClusteringRun&) = default;
};

namespace detail {

inline std::uint32_t nearest_centroid(std::span<const double> point, const Matrix& centroids, double& best_distance) {
    std::uint32_t best = 0;
    best_distance = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double dist = squared_distance(point, centroids.row(c));
        if (dist < best_distance) {
            best_distance = dist;
            best = static_cast<std::uint32_t>(c);
        }
    }
    return best;
}

/// Assigns every point and stores its squared distance in `distances`.
inline void assign_with_distances(const Matrix& points, const Matrix& centroids, std::size_t workers,
                                  std::vector<std::uint32_t>& labels, std::vector<double>& distances) {
    labels.resize(points.rows());
    distances.resize(points.rows());
    parallel_blocks(points.rows(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            labels[i] = nearest_centroid(points.row(i), centroids, distances[i]);
        }
    });
}

inline void check_dimensions(const Matrix& points, const Matrix& centroids) {
    if (centroids.rows() == 0) {
        throw StructuralError("no centroids given");
    }
    if (points.cols() != centroids.cols()) {
        throw StructuralError("points have " + std::to_string(points.cols()) + " dimensions but centroids have " +
                              std::to_string(centroids.cols()));
    }
}

}  // namespace detail

/// Index of the nearest centroid (squared Euclidean) per point; ties go to
/// the lowest centroid index.
inline std::vector<std::uint32_t> assign(const Matrix& points, const Matrix& centroids, std::size_t workers = 1) {
    detail::check_dimensions(points, centroids);
    std::vector<std::uint32_t> labels;
    std::vector<double> distances;
    detail::assign_with_distances(points, centroids, workers, labels, distances);
    return labels;
}

/// Initial centroids: k-means++ D^2 sampling or k distinct random points.
inline Matrix seed_centroids(const Matrix& points, std::size_t k, std::uint64_t seed, Init init) {
    const std::size_t n = points.rows();
    if (k == 0 || k > n) {
        throw ConfigError("k must be in [1, n]; got k=" + std::to_string(k) + ", n=" + std::to_string(n));
    }
    Engine engine(seed);
    Matrix centroids(k, points.cols());
    auto copy_point = [&](std::size_t c, std::size_t i) {
        std::copy_n(points.row(i).begin(), points.cols(), centroids.row(c).begin());
    };

    if (init == Init::random_points) {
        // partial Fisher-Yates over row indices
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t c = 0; c < k; ++c) {
            const std::size_t j = c + uniform_index(engine, n - c);
            std::swap(idx[c], idx[j]);
            copy_point(c, idx[c]);
        }
        return centroids;
    }

    copy_point(0, uniform_index(engine, n));
    std::vector<double> closest(n);
    for (std::size_t i = 0; i < n; ++i) {
        closest[i] = squared_distance(points.row(i), centroids.row(0));
    }
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : closest) {
            total += v;
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            const double target = uniform_unit(engine) * total;
            double running = 0.0;
            chosen = n;
            for (std::size_t i = 0; i < n; ++i) {
                running += closest[i];
                if (running > target && closest[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
            if (chosen == n) {
                // rounding pushed target past the running sum; take the last candidate
                for (std::size_t i = n; i-- > 0;) {
                    if (closest[i] > 0.0) {
                        chosen = i;
                        break;
                    }
                }
            }
        } else {
            chosen = uniform_index(engine, n);
        }
        copy_point(c, chosen);
        for (std::size_t i = 0; i < n; ++i) {
            closest[i] = std::min(closest[i], squared_distance(points.row(i), centroids.row(c)));
        }
    }
    return centroids;
}

/// Lloyd iterations from explicit starting centroids.
inline ClusteringRun fit_kmeans_from(const Matrix& points, Matrix centroids, const KMeansConfig& cfg = {},
                                     std::uint64_t seed = 0) {
    detail::check_dimensions(points, centroids);
    const std::size_t n = points.rows();
    const std::size_t k = centroids.rows();
    const std::size_t d = points.cols();
    if (k > n) {
        throw ConfigError("k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
    }
    if (cfg.max_iterations < 1) {
        throw ConfigError("max_iterations must be at least 1");
    }
    if (!(cfg.tolerance >= 0.0)) {
        throw ConfigError("tolerance must be non-negative");
    }

    ClusteringRun run;
    run.k = k;
    run.seed = seed;
    std::vector<double> distances;
    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);

    // Recomputes centroids as the mean of their members; empty clusters are
    // moved onto the points farthest from their current centroid.
    auto update = [&](const std::vector<std::uint32_t>& labels, Matrix& out) -> std::size_t {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), std::size_t{0});
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = labels[i];
            ++counts[c];
            const auto row = points.row(i);
            double* s = sums.data() + c * d;
            for (std::size_t j = 0; j < d; ++j) {
                s[j] += row[j];
            }
        }
        std::size_t repairs = 0;
        std::vector<std::size_t> by_distance;
        std::size_t next_far = 0;
        for (std::size_t c = 0; c < k; ++c) {
            auto dst = out.row(c);
            if (counts[c] > 0) {
                const double inv = 1.0 / static_cast<double>(counts[c]);
                for (std::size_t j = 0; j < d; ++j) {
                    dst[j] = sums[c * d + j] * inv;
                }
                continue;
            }
            if (by_distance.empty()) {
                by_distance.resize(n);
                std::iota(by_distance.begin(), by_distance.end(), std::size_t{0});
                std::stable_sort(by_distance.begin(), by_distance.end(),
                                 [&](std::size_t a, std::size_t b) { return distances[a] > distances[b]; });
            }
            const std::size_t donor = by_distance[std::min(next_far++, n - 1)];
            std::copy_n(points.row(donor).begin(), d, dst.begin());
            ++repairs;
        }
        return repairs;
    };

    Matrix next(k, d);
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        detail::assign_with_distances(points, centroids, cfg.workers, run.assignments, distances);
        double inertia = 0.0;
        for (double v : distances) {
            inertia += v;
        }
        run.inertia_trace.push_back(inertia);
        ++run.iterations;

        const std::size_t repairs = update(run.assignments, next);
        run.empty_cluster_repairs += repairs;
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift = std::max(shift, squared_distance(centroids.row(c), next.row(c)));
        }
        std::swap(centroids, next);
        if (repairs == 0 && shift <= cfg.tolerance) {
            break;
        }
    }

    // A repair in the final iteration leaves a centroid that no point is
    // assigned to yet; one more assignment keeps centroids and labels in step.
    if (std::any_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; })) {
        detail::assign_with_distances(points, centroids, cfg.workers, run.assignments, distances);
        update(run.assignments, centroids);
    }

    run.sizes.assign(k, 0);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ++run.sizes[run.assignments[i]];
        inertia += squared_distance(points.row(i), centroids.row(run.assignments[i]));
    }
    run.inertia = inertia;
    run.inertia_trace.push_back(inertia);
    run.centroids = std::move(centroids);
    return run;
}

inline ClusteringRun fit_kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansConfig& cfg = {}) {
    if (k == 0) {
        throw ConfigError("k must be positive");
    }
    if (k > points.rows()) {
        throw ConfigError("k=" + std::to_string(k) + " exceeds n=" + std::to_string(points.rows()));
    }
    return fit_kmeans_from(points, seed_centroids(points, k, seed, cfg.init), cfg, seed);
}

inline ClusteringRun fit_kmeans(const LabeledDataset& ds, std::size_t k, std::uint64_t seed,
                                const KMeansConfig& cfg = {}) {
    return fit_kmeans(ds.features, k, seed, cfg);
}

/// Debug dump: `<prefix>_assignments.csv` (one index per line) and
/// `<prefix>_centroids.csv` (size followed by the centroid coordinates).
inline void write_run(const std::filesystem::path& prefix, const ClusteringRun& run) {
    std::ofstream assignments(prefix.string() + "_assignments.csv", std::ios::binary);
    std::ofstream centroids(prefix.string() + "_centroids.csv", std::ios::binary);
    if (!assignments || !centroids) {
        throw ConfigError("cannot write clustering run to '" + prefix.string() + "'");
    }
    for (auto a : run.assignments) {
        assignments << a << '\n';
    }
    for (std::size_t c = 0; c < run.k; ++c) {
        centroids << run.sizes[c];
        for (double v : run.centroids.row(c)) {
            centroids << ',' << detail::format_double(v);
        }
        centroids << '\n';
    }
}

/// Inverse of write_run. Scalars that are not part of the two files
/// (seed, inertia, iterations) are left for the caller to fill in.
inline ClusteringRun read_run(const std::filesystem::path& prefix) {
    ClusteringRun run;
    {
        std::ifstream in(prefix.string() + "_centroids.csv", std::ios::binary);
        if (!in) {
            throw ConfigError("cannot open '" + prefix.string() + "_centroids.csv'");
        }
        CsvOptions opts;
        opts.header = false;
        auto table = read_csv(in, opts);
        run.k = table.size();
        if (table.dims() < 1) {
            throw StructuralError("centroid file has no columns");
        }
        run.centroids = Matrix(run.k, table.dims() - 1);
        for (std::size_t c = 0; c < run.k; ++c) {
            run.sizes.push_back(static_cast<std::size_t>(table.features(c, 0)));
            for (std::size_t j = 1; j < table.dims(); ++j) {
                run.centroids(c, j - 1) = table.features(c, j);
            }
        }
    }
    std::ifstream in(prefix.string() + "_assignments.csv", std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + prefix.string() + "_assignments.csv'");
    }
    std::size_t a = 0;
    while (in >> a) {
        if (a >= run.k) {
            throw StructuralError("assignment " + std::to_string(a) + " out of range for k=" + std::to_string(run.k));
        }
        run.assignments.push_back(static_cast<std::uint32_t>(a));
    }
    return run;
}

}  // namespace consist
