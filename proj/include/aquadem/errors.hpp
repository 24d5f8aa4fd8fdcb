#pragma once

#include <stdexcept>
#include <string>

namespace aquadem {

// Shape/contract violations: mismatched dimensions, stale caches, bad indices.
struct StructuralError : std::runtime_error {
  explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

// Out-of-domain parameter values (T <= 0, epsilon < 0, ...).
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Bad user input: empty datasets, missing files, malformed formats.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite arithmetic was expected.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aquadem
