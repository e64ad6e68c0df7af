#pragma once

#include <cstddef>
#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace kontext {

/// Worker count from KONTEXT_THREADS, else the available parallelism.
inline std::size_t default_thread_count()
{
  if (char const *env = std::getenv("KONTEXT_THREADS"))
  {
    try
    {
      long const n = std::stol(env);
      if (n > 0)
      {
        return static_cast<std::size_t>(n);
      }
    }
    catch (std::exception const &)
    {
    }
  }
  auto const hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs body(i, worker) for i in [0, count) over `threads` workers using a
/// static interleaved schedule. The first exception thrown is rethrown.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body &&body)
{
  if (threads <= 1 || count <= 1)
  {
    for (std::size_t i = 0; i < count; ++i)
    {
      body(i, std::size_t{0});
    }
    return;
  }
  threads = std::min(threads, count);
  std::exception_ptr       error;
  std::mutex               error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w)
  {
    pool.emplace_back([&, w] {
      try
      {
        for (std::size_t i = w; i < count; i += threads)
        {
          body(i, w);
        }
      }
      catch (...)
      {
        std::lock_guard lock(error_mutex);
        if (!error)
        {
          error = std::current_exception();
        }
      }
    });
  }
  for (auto &t : pool)
  {
    t.join();
  }
  if (error)
  {
    std::rethrow_exception(error);
  }
}

}  // namespace kontext
