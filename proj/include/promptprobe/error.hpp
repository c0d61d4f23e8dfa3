#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace promptprobe {

/// Error categories surfaced by the toolkit. The CLI maps kConfig and
/// kUsage to exit code 2 and everything else to exit code 3.
enum class ErrorKind {
  kUsage,      // caller violated a precondition (dim mismatch, bad argument)
  kDomain,     // mathematically undefined input (zero-norm vector, empty tally)
  kParse,      // malformed file content
  kLookup,     // token absent from the vocabulary
  kConfig,     // inconsistent or missing configuration
  kIo,         // unreadable or unwritable file
  kTransport,  // remote endpoint failure or protocol violation
  kNumerical,  // eigendecomposition failure, strongly negative eigenvalue
  kCampaign,   // a pipeline callback aborted a search
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace promptprobe
