#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "consist/consistency.hpp"
#include "consist/dataset.hpp"
#include "consist/error.hpp"
#include "consist/parallel.hpp"
#include "consist/random.hpp"

// Isolation Forest (Liu, Ting & Zhou, 2008).

namespace consist {

/// Average path length of an unsuccessful BST search over `n` points,
/// c(n) = 2 H(n-1) - 2 (n-1) / n with c(2) = 1 and c(n<2) = 0.
inline double average_path_length(double n) noexcept {
    if (n <= 1.0) {
        return 0.0;
    }
    if (n <= 2.0) {
        return 1.0;
    }
    constexpr double kEulerGamma = 0.5772156649015329;
    return 2.0 * (std::log(n - 1.0) + kEulerGamma) - 2.0 * (n - 1.0) / n;
}

/// s = 2^(-E[h] / c(psi)). A subsample of one point carries no information
/// and scores 0.5.
inline double anomaly_score(double mean_path_length, std::size_t subsample_size) noexcept {
    const double c = average_path_length(static_cast<double>(subsample_size));
    if (c == 0.0) {
        return 0.5;
    }
    return std::exp2(-mean_path_length / c);
}

struct IsolationTree {
    struct Node {
        // Leaves have feature == kLeaf; `size` is the subsample count there.
        static constexpr std::uint32_t kLeaf = UINT32_MAX;
        std::uint32_t feature = kLeaf;
        double split = 0.0;
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        std::size_t size = 0;

        bool is_leaf() const noexcept { return feature == kLeaf; }
        friend bool operator==(const Node&, const Node&) = default;
    };

    std::vector<Node> nodes;  // nodes[0] is the root
    std::size_t height_limit = 0;

    /// h(x): edges to the terminating leaf plus c(leaf size).
    double path_length(std::span<const double> x) const {
        std::uint32_t at = 0;
        double depth = 0.0;
        while (!nodes[at].is_leaf()) {
            const auto& node = nodes[at];
            at = x[node.feature] < node.split ? node.left : node.right;
            depth += 1.0;
        }
        return depth + average_path_length(static_cast<double>(nodes[at].size));
    }

    std::size_t height() const {
        std::vector<std::size_t> depth(nodes.size(), 0);
        std::size_t deepest = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            deepest = std::max(deepest, depth[i]);
            if (!nodes[i].is_leaf()) {
                depth[nodes[i].left] = depth[i] + 1;
                depth[nodes[i].right] = depth[i] + 1;
            }
        }
        return deepest;
    }

    friend bool operator==(const IsolationTree&, const IsolationTree&) = default;
};

struct IsolationForestModel {
    std::vector<IsolationTree> trees;
    std::size_t subsample_size = 0;
    std::size_t dims = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const IsolationForestModel&, const IsolationForestModel&) = default;
};

namespace detail {

inline IsolationTree grow_tree(const Matrix& x, std::vector<std::size_t> sample, std::size_t height_limit,
                               Engine& engine) {
    IsolationTree tree;
    tree.height_limit = height_limit;
    struct Pending {
        std::uint32_t node;
        std::size_t begin, end, depth;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack{{0, 0, sample.size(), 0}};
    std::vector<std::size_t> candidates;
    while (!stack.empty()) {
        const Pending job = stack.back();
        stack.pop_back();
        const std::size_t count = job.end - job.begin;
        auto make_leaf = [&] {
            tree.nodes[job.node].feature = IsolationTree::Node::kLeaf;
            tree.nodes[job.node].size = count;
        };
        if (job.depth >= height_limit || count <= 1) {
            make_leaf();
            continue;
        }
        // Only attributes that vary within the node can split it.
        candidates.clear();
        for (std::size_t q = 0; q < x.cols(); ++q) {
            const double first = x(sample[job.begin], q);
            for (std::size_t i = job.begin + 1; i < job.end; ++i) {
                if (x(sample[i], q) != first) {
                    candidates.push_back(q);
                    break;
                }
            }
        }
        if (candidates.empty()) {
            make_leaf();
            continue;
        }
        const std::size_t q = candidates[uniform_index(engine, candidates.size())];
        double lo = x(sample[job.begin], q);
        double hi = lo;
        for (std::size_t i = job.begin + 1; i < job.end; ++i) {
            lo = std::min(lo, x(sample[i], q));
            hi = std::max(hi, x(sample[i], q));
        }
        double split = lo + uniform_unit(engine) * (hi - lo);
        if (split <= lo) {
            split = std::nextafter(lo, hi);
        }
        const auto mid = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                        sample.begin() + static_cast<std::ptrdiff_t>(job.end),
                                        [&](std::size_t i) { return x(i, q) < split; });
        const std::size_t cut = static_cast<std::size_t>(mid - sample.begin());

        const auto left = static_cast<std::uint32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        const auto right = static_cast<std::uint32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        auto& node = tree.nodes[job.node];
        node.feature = static_cast<std::uint32_t>(q);
        node.split = split;
        node.left = left;
        node.right = right;
        node.size = count;
        stack.push_back({right, cut, job.end, job.depth + 1});
        stack.push_back({left, job.begin, cut, job.depth + 1});
    }
    return tree;
}

}  // namespace detail

/// T trees, each grown on its own subsample (without replacement) of size
/// psi with height limit ceil(log2 psi).
inline IsolationForestModel fit_iforest(const LabeledDataset& ds, std::size_t trees = 100,
                                        std::size_t subsample_size = 256, std::uint64_t seed = 0,
                                        std::size_t workers = 0) {
    const std::size_t n = ds.size();
    if (trees == 0) {
        throw ConfigError("isolation forest needs at least one tree");
    }
    if (subsample_size == 0 || subsample_size > n) {
        throw ConfigError("subsample size " + std::to_string(subsample_size) + " must be in [1, n=" +
                          std::to_string(n) + "]");
    }
    IsolationForestModel model;
    model.subsample_size = subsample_size;
    model.dims = ds.dims();
    model.seed = seed;
    model.trees.resize(trees);
    const auto height_limit =
        static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(subsample_size))));
    parallel_for(trees, workers, [&](std::size_t t) {
        Engine engine(derive_seed(seed, t));
        // partial Fisher-Yates: first psi entries form the subsample
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < subsample_size; ++i) {
            std::swap(idx[i], idx[i + uniform_index(engine, n - i)]);
        }
        idx.resize(subsample_size);
        model.trees[t] = detail::grow_tree(ds.features, std::move(idx), height_limit, engine);
    });
    return model;
}

/// Mean path length per point across trees.
inline std::vector<double> mean_path_lengths(const IsolationForestModel& model, const Matrix& x,
                                             std::size_t workers = 0) {
    if (x.cols() != model.dims) {
        throw UsageError("isolation forest trained on " + std::to_string(model.dims) + " features, got " +
                         std::to_string(x.cols()));
    }
    std::vector<double> out(x.rows());
    parallel_blocks(x.rows(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double sum = 0.0;
            for (const auto& tree : model.trees) {
                sum += tree.path_length(x.row(i));
            }
            out[i] = sum / static_cast<double>(model.trees.size());
        }
    });
    return out;
}

inline ScoreVector iforest_scores(const IsolationForestModel& model, const LabeledDataset& ds,
                                  std::size_t workers = 0) {
    auto lengths = mean_path_lengths(model, ds.features, workers);
    ScoreVector sv;
    sv.direction = Direction::high_is_outlier;
    sv.source = {"iforest",
                 "trees=" + std::to_string(model.trees.size()) + " subsample=" + std::to_string(model.subsample_size),
                 model.seed, 0};
    sv.scores.reserve(lengths.size());
    for (double h : lengths) {
        sv.scores.push_back(anomaly_score(h, model.subsample_size));
    }
    return sv;
}

}  // namespace consist
