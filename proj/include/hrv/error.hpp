#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hrv {

enum class ErrorKind {
  input,
  empty_input,
  ingest,
  schema,
  config,
  numeric,
  alignment,
  leakage,
  unresolved_conflict,
  chain,
  training_degenerate,
  io,
};

std::string_view to_string(ErrorKind kind);

// Every pipeline failure is reported through this one exception type; the
// kind is what the CLI serializes into its machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hrv
