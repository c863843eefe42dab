#include "pifnet/common.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace pifnet {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

void ensure_finite(const std::vector<Scalar>& v, const char* op_name) {
    for (Scalar x : v) {
        if (!std::isfinite(x)) {
            throw NumericalError(std::string(op_name) + ": non-finite value produced");
        }
    }
}

namespace {
std::atomic<int> g_threads{0};

int default_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (hw > 4) hw = 4;
    return static_cast<int>(hw);
}
}  // namespace

void set_num_threads(int n) { g_threads = n < 1 ? 1 : n; }

int num_threads() {
    int n = g_threads.load();
    if (n == 0) {
        n = default_threads();
        g_threads = n;
    }
    return n;
}

void parallel_for(std::size_t total, const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t workers = static_cast<std::size_t>(num_threads());
    if (workers <= 1 || total <= 1) {
        fn(0, total);
        return;
    }
    const std::size_t n = std::min(workers, total);
    const std::size_t chunk = (total + n - 1) / n;
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        std::size_t begin = t * chunk;
        std::size_t end = std::min(begin + chunk, total);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace pifnet
