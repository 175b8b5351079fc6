#include "qrc/error.hpp"

namespace qrc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInputShape: return "input-shape error";
    case ErrorKind::kResource: return "resource error";
    case ErrorKind::kState: return "state error";
    case ErrorKind::kIngestion: return "ingestion error";
    case ErrorKind::kInsufficientData: return "insufficient-data error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kEvaluation: return "evaluation error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kInternal: return "internal error";
  }
  return "unknown error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kInternal:
    case ErrorKind::kState: return kExitInternal;
    default: return kExitValidation;
  }
}

}  // namespace qrc
