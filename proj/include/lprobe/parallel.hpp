#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lprobe {

/// Runs fn(begin, end) over contiguous chunks of [0, n) on up to `jobs`
/// threads. Callers write results into per-index slots so the outcome does
/// not depend on the job count; any reduction happens afterwards, in order.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (unsigned j = 0; j < jobs; ++j) {
    const std::size_t b = n * j / jobs, e = n * (j + 1) / jobs;
    pool.emplace_back([&, j, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace lprobe
