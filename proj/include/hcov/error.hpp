#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hcov {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

//! raised by factorizations on a nonpositive pivot
class NotPositiveDefinite : public Error
{
public:
    explicit NotPositiveDefinite(std::size_t pivot)
        : Error("matrix not positive definite at pivot " + std::to_string(pivot))
        , pivot_(pivot)
    {}

    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

} // namespace hcov
