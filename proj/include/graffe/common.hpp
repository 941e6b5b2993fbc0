#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace graffe {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operand shapes do not conform for an operation.
class ShapeError : public Error {
public:
    ShapeError(const std::string& op, const Shape& a, const Shape& b)
        : Error("shape mismatch in " + op + ": " + shape_str(a) + " vs " + shape_str(b)),
          op_name(op), lhs(a), rhs(b) {}
    ShapeError(const std::string& op, const std::string& detail)
        : Error("shape error in " + op + ": " + detail), op_name(op) {}
    std::string op_name;
    Shape lhs, rhs;
};

/// Autodiff misuse: non-scalar root, repeated backward, missing grad.
class AutodiffError : public Error {
public:
    explicit AutodiffError(const std::string& msg) : Error(msg) {}
};

/// Dataset / checkpoint file problems.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Bad configuration value or unknown key.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Thread cap resolved from GRAFFE_THREADS (defaults to hardware parallelism).
std::size_t max_threads();

}  // namespace graffe

#include <thread>

namespace graffe {

inline std::size_t max_threads() {
    if (const char* env = std::getenv("GRAFFE_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

}  // namespace graffe
