#pragma once

#include <stdexcept>
#include <string>

namespace kfdp {

enum class ErrorCode {
  invalid_input,
  duplicate_id,
  empty_after_preprocessing,
  infeasible_k,
  invalid_step_size,
  plan_mismatch,
  oracle_size_exceeded,
  unknown_id,
  dropped_id,
  unknown_session,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kfdp
