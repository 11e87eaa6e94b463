#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lg {

enum class ErrorKind {
  Constraint,
  Shape,
  UnsupportedSubmanifold,
  Rank,
  Unsupported,
  Tameness,
  Action,
  Sampling,
  Capability,
  Degeneracy,
  Pairing,
  GluingHypothesis,
  Section,
  Truncation,
  Composability,
  Scenario,
};

std::string_view to_string(ErrorKind kind);

/// All library failures carry a kind and, where one exists, a witness
/// (coordinates of the offending point, arrow or vector).
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what, std::string witness = {})
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what),
        kind_(kind),
        witness_(std::move(witness)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& witness() const { return witness_; }

private:
  ErrorKind kind_;
  std::string witness_;
};

}  // namespace lg
