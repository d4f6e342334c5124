#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cgscore::parallel {

namespace detail {
inline std::atomic<unsigned>& thread_budget() {
  static std::atomic<unsigned> budget{1};
  return budget;
}
}  // namespace detail

inline void set_max_threads(unsigned n) { detail::thread_budget().store(n == 0 ? 1u : n); }
inline unsigned max_threads() { return detail::thread_budget().load(); }

// Runs fn(begin, end) over a partition of [0, count). Every index is handled
// exactly once and chunks touch disjoint output state, so results do not
// depend on the thread budget. The first exception (lowest chunk) wins.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  if (count == 0) return;
  const std::size_t budget = std::min<std::size_t>(max_threads(), count);
  if (budget <= 1) {
    fn(std::size_t{0}, count);
    return;
  }

  std::vector<std::exception_ptr> errors(budget);
  std::vector<std::thread> workers;
  workers.reserve(budget);
  const std::size_t chunk = (count + budget - 1) / budget;
  for (std::size_t w = 0; w < budget; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace cgscore::parallel
