#include "aggmrf/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace aggmrf {

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t w = std::clamp<std::size_t>(workers < 1 ? 1 : workers, 1, n);
    if (w == 1) {
        body(0, n);
        return;
    }
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> threads;
    threads.reserve(w);
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, t, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace aggmrf
