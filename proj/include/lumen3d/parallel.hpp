#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lumen3d {

/// Worker count: hardware concurrency, capped by LUMEN3D_THREADS when set.
inline unsigned worker_count()
{
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LUMEN3D_THREADS"))
    {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1)
            n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Runs fn(i) for i in [0, count) over contiguous blocks. fn must only write
/// state owned by index i, so results do not depend on the schedule.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn)
{
    const std::size_t workers = std::min<std::size_t>(worker_count(), count);
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }

    std::exception_ptr failure;
    std::mutex failureMutex;
    const std::size_t block = (count + workers - 1) / workers;
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
    {
        const std::size_t begin = w * block;
        const std::size_t end = std::min(count, begin + block);
        if (begin >= end)
            break;
        threads.emplace_back([&, begin, end] {
            try
            {
                for (std::size_t i = begin; i < end; ++i)
                    fn(i);
            }
            catch (...)
            {
                std::lock_guard lock(failureMutex);
                if (!failure)
                    failure = std::current_exception();
            }
        });
    }
    threads.clear();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace lumen3d
