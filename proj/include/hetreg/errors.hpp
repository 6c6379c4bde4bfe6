#pragma once

#include <stdexcept>
#include <string>

namespace hetreg {

/// Base class for all hetreg errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A scalar parameter is out of its admissible range (e.g. delta <= 0).
class invalid_parameter_error : public error {
public:
    using error::error;
};

/// Input data violate a precondition (empty vector, size mismatch, NaN, ...).
class invalid_input_error : public error {
public:
    using error::error;
};

/// A cluster structure is inconsistent with the design it is applied to.
class invalid_structure_error : public error {
public:
    using error::error;
};

/// Engine configuration is unusable (e.g. n < K).
class invalid_config_error : public error {
public:
    using error::error;
};

/// The iterative solver produced a non-finite quantity.
class numerical_error : public error {
public:
    numerical_error(const std::string& what, long iteration)
        : error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

/// Subgroup prediction was requested without a response value and without a
/// configured fallback label.
class unsupported_prediction_error : public error {
public:
    using error::error;
};

/// A metric is undefined on the given input (e.g. PMRE with all-zero y).
class undefined_metric_error : public error {
public:
    using error::error;
};

}  // namespace hetreg
