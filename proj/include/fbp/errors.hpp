#pragma once

#include <stdexcept>
#include <string>

namespace fbp {

// Bad input or configuration (maps to CLI exit code 1).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numerical failure of a solver (maps to CLI exit code 2).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonContraction : public SolverError {
public:
    using SolverError::SolverError;
};

class NotBracketed : public SolverError {
public:
    using SolverError::SolverError;
};

class SingularLinearization : public SolverError {
public:
    using SolverError::SolverError;
};

class PositivityLoss : public SolverError {
public:
    using SolverError::SolverError;
};

class NonConvergence : public SolverError {
public:
    using SolverError::SolverError;
};

class TransversalityLoss : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace fbp
