#pragma once

#include <stdexcept>
#include <string>

namespace dbn {

/// Malformed or inconsistent input data (CSV parse errors, bad value
/// indices, unknown columns).
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Model file violates the schema or the model invariants.
class SchemaError : public std::runtime_error {
  public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

/// The observed evidence has probability zero under the current model.
/// Carries the slice index at which the mass vanished.
class ZeroMassEvidence : public std::runtime_error {
  public:
    ZeroMassEvidence(int slice, const std::string& what)
        : std::runtime_error(what), slice_(slice) {}
    int slice() const { return slice_; }

  private:
    int slice_;
};

/// Joint state space exceeds the configured bound for flat-state inference.
class StateSpaceTooLarge : public std::runtime_error {
  public:
    explicit StateSpaceTooLarge(const std::string& what)
        : std::runtime_error(what) {}
};

/// A marginal query names variables not jointly contained in any clique.
class NotInAnyClique : public std::runtime_error {
  public:
    explicit NotInAnyClique(const std::string& what)
        : std::runtime_error(what) {}
};

} // namespace dbn
