#pragma once

#include <exception>
#include <vector>

#include <omp.h>

namespace laplab::detail
{
    // Runs fn(0..n-1). Jobs write to pre-indexed slots, so the result does not
    // depend on scheduling. The first failure (by job index) is rethrown.
    template <typename Fn>
    void for_each_job(int n, int workers, bool parallel, Fn&& fn)
    {
        std::vector<std::exception_ptr> errors(n);
        if (parallel)
        {
            const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
            for (int k = 0; k < n; ++k)
            {
                try
                {
                    fn(k);
                }
                catch (...)
                {
                    errors[k] = std::current_exception();
                }
            }
        }
        else
        {
            for (int k = 0; k < n; ++k)
            {
                try
                {
                    fn(k);
                }
                catch (...)
                {
                    errors[k] = std::current_exception();
                }
            }
        }
        for (auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    }
}
