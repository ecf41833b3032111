#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ulakit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs whose shapes disagree (vector length vs model dimension, ...).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Arguments outside an operation's documented domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A chain produced a non-finite state.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error(what), chain_(0), step_(0) {}
    DivergenceError(std::size_t chain, std::size_t step)
        : Error("chain " + std::to_string(chain) + " diverged at step " + std::to_string(step)),
          chain_(chain),
          step_(step) {}

    std::size_t chain() const noexcept { return chain_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t chain_;
    std::size_t step_;
};

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) +
                             ", got " + std::to_string(got));
    }
}

}  // namespace ulakit
