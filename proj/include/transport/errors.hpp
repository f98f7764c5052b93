#ifndef TRANSPORT_ERRORS_HPP
#define TRANSPORT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace transport {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input file or schema problems (CLI exit code 1).
class SchemaError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Model-fitting problems (CLI exit code 2).
class ModelError : public Error {
public:
    using Error::Error;
};

class SingularDesignError : public ModelError {
public:
    using ModelError::ModelError;
};

class DegenerateOutcomeError : public ModelError {
public:
    using ModelError::ModelError;
};

class SeparationError : public ModelError {
public:
    using ModelError::ModelError;
};

// Estimation / inference problems (CLI exit code 3).
class PositivityError : public Error {
public:
    using Error::Error;
};

class InferenceError : public Error {
public:
    using Error::Error;
};

class NotApplicableError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace transport

#endif  // TRANSPORT_ERRORS_HPP
