#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace starq {

// Worker count: STARQ_THREADS if set and positive, else hardware concurrency.
int worker_count();

// Calls body(i) for i in [0, n). Each index must write only to its own slot;
// callers reduce afterwards in index order so results never depend on the
// number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

template <typename T, typename F>
std::vector<T> parallel_map(std::size_t n, F&& f) {
  std::vector<T> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = f(i); });
  return out;
}

// Pairwise (tree) sum in index order.
double ordered_sum(const std::vector<double>& v);

}  // namespace starq
