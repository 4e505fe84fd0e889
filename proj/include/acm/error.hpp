#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace acm {

enum class ErrorKind {
  MalformedSpec,
  InfiniteMean,
  WrongMinimumSupport,
  TooFewRegenerations,
  TooFewGaps,
  EmptySnapshot,
  TooLargeToEnumerate,
  MalformedInitialGraph,
  FutureSnapshot,
  TraceMismatch,
  HorizonTooLargeForExact,
  ConfigError,
  ResourceBound,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedSpec: return "MalformedSpec";
    case ErrorKind::InfiniteMean: return "InfiniteMean";
    case ErrorKind::WrongMinimumSupport: return "WrongMinimumSupport";
    case ErrorKind::TooFewRegenerations: return "TooFewRegenerations";
    case ErrorKind::TooFewGaps: return "TooFewGaps";
    case ErrorKind::EmptySnapshot: return "EmptySnapshot";
    case ErrorKind::TooLargeToEnumerate: return "TooLargeToEnumerate";
    case ErrorKind::MalformedInitialGraph: return "MalformedInitialGraph";
    case ErrorKind::FutureSnapshot: return "FutureSnapshot";
    case ErrorKind::TraceMismatch: return "TraceMismatch";
    case ErrorKind::HorizonTooLargeForExact: return "HorizonTooLargeForExact";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ResourceBound: return "ResourceBound";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace acm
