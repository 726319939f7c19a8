#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace consist {

/// 0 means "use all hardware threads".
inline std::size_t resolve_workers(std::size_t requested) noexcept {
    if (requested != 0) {
        return requested;
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Calls fn(i) for every i in [0, count) on up to `workers` threads.
/// Each index is visited exactly once; results must be written to
/// per-index slots so that the outcome does not depend on scheduling.
/// The first exception thrown by any task is rethrown on the caller.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::min(resolve_workers(workers), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(count);
            }
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) {
            pool.emplace_back(body);
        }
        body();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

/// Splits [0, count) into contiguous blocks and calls fn(begin, end) per block.
template <class Fn>
void parallel_blocks(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::min(resolve_workers(workers), std::max<std::size_t>(count, 1));
    const std::size_t block = (count + workers - 1) / std::max<std::size_t>(workers, 1);
    parallel_for(workers, workers, [&](std::size_t w) {
        const std::size_t begin = std::min(count, w * block);
        const std::size_t end = std::min(count, begin + block);
        if (begin < end) {
            fn(begin, end);
        }
    });
}

}  // namespace consist
