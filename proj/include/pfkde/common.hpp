#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pfkde {

// Numerical failures (degeneracy, singular matrices, non-convergent
// quadrature). The CLI maps these to exit code 3.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// All unnormalized importance weights vanished. Deliberately a hard error:
// a silent uniform reset would mask a model/observation mismatch.
class weight_degeneracy_error : public numerical_error {
public:
    explicit weight_degeneracy_error(const std::string& msg) : numerical_error(msg) {}
};

// Round-trip decimal formatting for CSV output. 17 significant digits keep
// doubles bit-exact across write/read, which the byte-identical rerun
// contract relies on.
inline std::string num_str(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Chunked parallel loop over [0, count). Item order inside a chunk is
// sequential and results must be written to per-index slots, so the
// reduction done afterwards is deterministic regardless of thread count.
inline void parallel_for(std::size_t count, int threads,
                         const std::function<void(std::size_t)>& body) {
    int k = resolve_threads(threads);
    if (k <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    if (static_cast<std::size_t>(k) > count) k = static_cast<int>(count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(k));
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (int w = 0; w < k; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = static_cast<std::size_t>(w); i < count;
                     i += static_cast<std::size_t>(k)) {
                    body(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace pfkde
