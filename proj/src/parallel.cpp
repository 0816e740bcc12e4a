#include "hcov/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hcov {

namespace {

std::atomic<std::size_t> thread_count{0};

// nested parallel_for calls run serially on the calling worker
thread_local bool inside_region = false;

struct RegionGuard
{
    bool previous = inside_region;
    RegionGuard() { inside_region = true; }
    ~RegionGuard() { inside_region = previous; }
};

} // namespace

void set_num_threads(std::size_t n)
{
    thread_count = n;
}

std::size_t num_threads()
{
    const auto n = thread_count.load();
    if (n > 0)
        return n;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t workers)
{
    if (workers == 0)
        workers = num_threads();
    workers = std::min(workers, n);

    if (workers <= 1 || inside_region) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto run = [&] {
        RegionGuard guard;
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                body(i);
            }
            catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = n;
                return;
            }
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w)
            pool.emplace_back(run);
        run();
    }
    if (error)
        std::rethrow_exception(error);
}

} // namespace hcov
