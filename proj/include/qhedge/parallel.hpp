#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qhedge {

struct Parallelism {
    unsigned threads = 0;  // 0 = hardware concurrency

    unsigned resolved() const {
        if (threads > 0) return threads;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

inline constexpr std::size_t kChunkSize = 1 << 14;

// Runs body(begin, end) over fixed-size chunks of [0, n). Chunk boundaries
// depend only on n, never on the thread count. Bodies must write to
// disjoint outputs.
template <class Body>
void parallel_chunks(std::size_t n, const Parallelism& par, Body&& body) {
    const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(par.resolved(), chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c)
            body(c * kChunkSize, std::min(n, (c + 1) * kChunkSize));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            try {
                body(c * kChunkSize, std::min(n, (c + 1) * kChunkSize));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace qhedge
