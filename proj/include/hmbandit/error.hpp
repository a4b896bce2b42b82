#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hmb {

enum class Errc {
  OutOfRange,
  OrderViolation,
  DegenerateObservation,
  NoConvergence,
  UnsupportedOrdering,
  TooCoarse,
  IterationBudgetExceeded,
  HorizonTooLarge,
  NoCrossingInBracket,
  NonTerminatingTau,
  MissingIndexTable,
  ParseError,
  ValidationError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::OrderViolation: return "OrderViolation";
    case Errc::DegenerateObservation: return "DegenerateObservation";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::UnsupportedOrdering: return "UnsupportedOrdering";
    case Errc::TooCoarse: return "TooCoarse";
    case Errc::IterationBudgetExceeded: return "IterationBudgetExceeded";
    case Errc::HorizonTooLarge: return "HorizonTooLarge";
    case Errc::NoCrossingInBracket: return "NoCrossingInBracket";
    case Errc::NonTerminatingTau: return "NonTerminatingTau";
    case Errc::MissingIndexTable: return "MissingIndexTable";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hmb
