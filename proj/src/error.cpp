#include "lg/error.hpp"

namespace lg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Constraint: return "constraint";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::UnsupportedSubmanifold: return "unsupported-submanifold";
    case ErrorKind::Rank: return "rank";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Tameness: return "tameness";
    case ErrorKind::Action: return "action";
    case ErrorKind::Sampling: return "sampling";
    case ErrorKind::Capability: return "capability";
    case ErrorKind::Degeneracy: return "degeneracy";
    case ErrorKind::Pairing: return "pairing";
    case ErrorKind::GluingHypothesis: return "gluing-hypothesis";
    case ErrorKind::Section: return "section";
    case ErrorKind::Truncation: return "truncation";
    case ErrorKind::Composability: return "composability";
    case ErrorKind::Scenario: return "scenario";
  }
  return "unknown";
}

}  // namespace lg
