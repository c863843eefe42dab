#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pifnet {

// All math runs in double precision.
using Scalar = double;
using Shape = std::vector<std::size_t>;

// Error taxonomy; the CLI maps each class to a distinct exit code.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

// Throws NumericalError if any element is NaN or infinite.
void ensure_finite(const std::vector<Scalar>& v, const char* op_name);

// Worker count for data-parallel loops. Parallelism is only applied to
// loops whose iterations write disjoint output ranges, so results are
// bit-identical to serial execution for any thread count.
void set_num_threads(int n);
int num_threads();

// Splits [0, total) into contiguous chunks, one per worker.
// fn(begin, end) must not touch state owned by another chunk.
void parallel_for(std::size_t total, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace pifnet
