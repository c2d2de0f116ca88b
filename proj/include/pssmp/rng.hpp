#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace pssmp {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent stream for one path, a pure function of (master seed, path index).
inline Engine path_engine(std::uint64_t master_seed, std::uint64_t path_index) {
    std::uint64_t s = master_seed ^ (0xd1b54a32d192ed03ULL * (path_index + 1));
    std::vector<std::uint32_t> words;
    for (int i = 0; i < 4; ++i) {
        const std::uint64_t w = splitmix64(s);
        words.push_back(static_cast<std::uint32_t>(w));
        words.push_back(static_cast<std::uint32_t>(w >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Engine(seq);
}

/// Calls body(i) for i in [0, count) on `workers` threads. Results must be
/// written to per-index slots; the caller reduces them in index order.
template <class Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
    workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        try {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) break;
                body(i);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next.store(count);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace pssmp
