#pragma once

#include <stdexcept>
#include <string>

namespace densopt {

/// Invalid arguments, malformed files, violated preconditions.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: factorization breakdown, eigensolver non-convergence, no root found.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw InputError(msg);
}

} // namespace detail
} // namespace densopt
