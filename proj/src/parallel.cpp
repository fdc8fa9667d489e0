#include "harmony/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace harmony {

namespace {

std::atomic<std::size_t> g_max_jobs{0};
thread_local bool t_inside_worker = false;

} // namespace

void set_max_jobs(std::size_t jobs) { g_max_jobs.store(jobs); }

std::size_t max_jobs()
{
    const std::size_t j = g_max_jobs.load();
    if (j != 0)
        return j;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body)
{
    const std::size_t workers = std::min(n, max_jobs());
    if (workers <= 1 || t_inside_worker) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }

    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        t_inside_worker = true;
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        t_inside_worker = false;
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();

    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace harmony
