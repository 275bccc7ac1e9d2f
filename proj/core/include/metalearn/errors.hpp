#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace metalearn {

/// Violated precondition: mismatched dimensions, invalid configuration values.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A NaN/Inf appeared where finite values are required. Carries the inner
/// step or outer iteration at which it was detected, when known.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(what), index_(index) {}

    std::optional<std::size_t> index() const { return index_; }

private:
    std::optional<std::size_t> index_;
};

/// A finite-difference or closed-form oracle could not produce a trustworthy value.
class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace metalearn
