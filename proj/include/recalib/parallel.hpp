#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace recalib {

/// Runs body(i) for i in [0, n). With threads <= 1 this is a plain loop;
/// otherwise indices are dealt round-robin to worker threads. Callers must
/// make body(i) independent of execution order (per-index RNG substreams,
/// preallocated output slots).
template <typename Body>
void parallel_for(int n, int threads, Body&& body) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < n; i += workers) body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace recalib
