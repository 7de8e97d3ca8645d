#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aggmrf {

/// Input, format or configuration problem. The CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite parameters during training. The CLI maps it to exit code 2.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::int64_t iteration)
        : Error(what), iteration_(iteration) {}

    std::int64_t iteration() const noexcept { return iteration_; }

private:
    std::int64_t iteration_;
};

using Modality = std::uint32_t;

}  // namespace aggmrf
