#pragma once

#include <stdexcept>
#include <string>

namespace renorm {

enum class ErrorKind {
  AmbientMismatch,
  DomainEscape,
  InversionDiverged,
  GridTooCoarse,
  IntegrationFailure,
  TowerOverlap,
  ConstructionFailure,
  InfeasibleBudget,
  SupportViolation,
  OrbitEscape,
  InvalidArgument,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::AmbientMismatch: return "AmbientMismatch";
    case ErrorKind::DomainEscape: return "DomainEscape";
    case ErrorKind::InversionDiverged: return "InversionDiverged";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::IntegrationFailure: return "IntegrationFailure";
    case ErrorKind::TowerOverlap: return "TowerOverlap";
    case ErrorKind::ConstructionFailure: return "ConstructionFailure";
    case ErrorKind::InfeasibleBudget: return "InfeasibleBudget";
    case ErrorKind::SupportViolation: return "SupportViolation";
    case ErrorKind::OrbitEscape: return "OrbitEscape";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace renorm
