#include "pags/common.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace pags {

namespace {

std::mutex g_sink_mutex;
WarningSink g_sink;
std::atomic<std::size_t> g_warning_count{0};

}  // namespace

void log_warning(std::string_view message) {
    g_warning_count.fetch_add(1, std::memory_order_relaxed);
    std::lock_guard lock(g_sink_mutex);
    if (g_sink) {
        g_sink(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(g_sink_mutex);
    std::swap(g_sink, sink);
    return sink;
}

std::size_t warning_count() { return g_warning_count.load(std::memory_order_relaxed); }

int default_worker_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 0) workers = default_worker_count();
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(w);
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&fn, begin, end] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& th : threads) th.join();
}

}  // namespace pags
