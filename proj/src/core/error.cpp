#include "core/error.hpp"

namespace pvae {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidAudio: return "invalid_audio";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kCorrupt: return "corrupt";
    case ErrorCode::kIncompatible: return "incompatible";
    case ErrorCode::kStage: return "stage";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kEmptyCorpus: return "empty_corpus";
  }
  return "unknown";
}

}  // namespace pvae
