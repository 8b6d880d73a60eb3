#pragma once

#include <stdexcept>
#include <string>

namespace pvae {

enum class ErrorCode {
  kInvalidArgument = 1,
  kInvalidAudio,
  kShape,
  kIo,
  kNotFound,
  kFormat,
  kCorrupt,
  kIncompatible,
  kStage,
  kNumerical,
  kDiverged,
  kEmptyCorpus,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) throw Error(code, message);
}

}  // namespace pvae
