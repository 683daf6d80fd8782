#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvcwm {

/// Base of every recoverable error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (x <= 0 for K, etc.).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inconsistent matrix or data dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input that fails validation (bad CLI flags, malformed files, empty grids).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization hit a non-positive pivot.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(std::size_t pivot, const std::string& what)
        : Error(what), pivot_(pivot) {}
    [[nodiscard]] std::size_t pivot() const { return pivot_; }

private:
    std::size_t pivot_;
};

/// The regression normal-equation matrix of a component is singular.
class SingularDesignError : public Error {
public:
    SingularDesignError(std::size_t component, const std::string& what)
        : Error(what), component_(component) {}
    [[nodiscard]] std::size_t component() const { return component_; }

private:
    std::size_t component_;
};

/// Non-finite density or moment; carries the (observation, component) cell when known.
class NumericalError : public Error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    explicit NumericalError(const std::string& what, std::size_t obs = npos,
                            std::size_t component = npos)
        : Error(what), obs_(obs), component_(component) {}
    [[nodiscard]] std::size_t observation() const { return obs_; }
    [[nodiscard]] std::size_t component() const { return component_; }

private:
    std::size_t obs_;
    std::size_t component_;
};

/// A mixture component emptied out or its scale matrices could not be repaired.
class CollapseError : public Error {
public:
    CollapseError(std::size_t component, const std::string& what)
        : Error(what), component_(component) {}
    [[nodiscard]] std::size_t component() const { return component_; }

private:
    std::size_t component_;
};

}  // namespace mvcwm
