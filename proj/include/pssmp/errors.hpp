#pragma once

#include <stdexcept>
#include <string>

namespace pssmp {

/// Base for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A triplet or jump measure violates one of its structural invariants.
class InvalidTriplet : public Error {
public:
    enum class Reason {
        positive_support,
        non_positive_mass,
        non_integrable,
        negative_sigma2,
        negative_kill_rate,
        non_finite,
    };

    InvalidTriplet(Reason reason, const std::string& what) : Error(what), reason_(reason) {}

    Reason reason() const noexcept { return reason_; }

private:
    Reason reason_;
};

/// Adaptive quadrature could not reach its tolerance.
class QuadratureFailure : public Error {
public:
    QuadratureFailure(const std::string& what, double achieved_error)
        : Error(what + " (achieved error estimate " + std::to_string(achieved_error) + ")"),
          achieved_error_(achieved_error) {}

    double achieved_error() const noexcept { return achieved_error_; }

private:
    double achieved_error_;
};

/// A result left the representable floating range.
class NumericOverflow : public Error {
public:
    using Error::Error;
};

/// An operation was called outside its documented domain.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Model/config document could not be parsed; message starts with the JSON path.
class ParseError : public Error {
public:
    ParseError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A simulated ensemble is unusable (too many aborted paths).
class InvalidEnsemble : public Error {
public:
    using Error::Error;
};

}  // namespace pssmp
