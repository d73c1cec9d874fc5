#pragma once

#include <stdexcept>
#include <string>

namespace dvrnn {

enum class ErrorCode {
  invalid_argument,
  io,
  bad_magic,
  unsupported_version,
  truncated,
  dimension_mismatch,
  vocab_mismatch,
  no_doc_vector,
  non_finite,
  diverged,
  config,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// C layer can map it onto a status value without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dvrnn
