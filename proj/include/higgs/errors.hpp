#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace higgs {

/// Failure of a numerical evaluation or integration step.
/// Carries the index of the failing step (or sample) once it is known.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what), message_(what) {}

    void set_index(std::size_t index)
    {
        index_ = index;
        message_ = std::string(std::runtime_error::what()) + " (at index " + std::to_string(index) + ")";
    }
    std::optional<std::size_t> index() const { return index_; }
    const char* what() const noexcept override { return message_.c_str(); }

private:
    std::optional<std::size_t> index_;
    std::string message_;
};

/// Point outside the north chart of the sphere (x.x >= R0^2).
class ChartViolation : public NumericalError {
    using NumericalError::NumericalError;
};

/// |x0| fell below the equator floor where x^2/x0^2 type terms diverge.
class EquatorSingularity : public NumericalError {
    using NumericalError::NumericalError;
};

/// |x| fell below the Coulomb-centre floor.
class OriginSingularity : public NumericalError {
    using NumericalError::NumericalError;
};

/// RATTLE multiplier solve did not converge.
class NewtonDivergence : public NumericalError {
    using NumericalError::NumericalError;
};

/// No orbit return below threshold.
class NotFound : public NumericalError {
    using NumericalError::NumericalError;
};

/// T is not a symmetric involution different from the identity.
class InvalidT : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Oscillator data off the U(1)-reducible subspace for a monopole-free reduction.
class FiberViolation : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Potential term that a reduction cannot push forward.
class UnsupportedTerm : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Inconsistent or malformed experiment configuration.
class ConfigError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace higgs
