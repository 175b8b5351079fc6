#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qrc {

enum class ErrorKind {
  kInputShape,
  kResource,
  kState,
  kIngestion,
  kInsufficientData,
  kConfig,
  kEvaluation,
  kIo,
  kInternal,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for the library. The kind drives the CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// CLI exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitInternal = 3;

int exit_code_for(ErrorKind kind);

}  // namespace qrc
