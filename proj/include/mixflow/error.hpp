#pragma once

#include <stdexcept>
#include <string>

namespace mixflow {

enum class ErrorCode {
  kInvalidInput,    // bad files, schema violations, domain errors
  kInfeasible,      // no plan satisfies the stated budgets
  kVerifyFailed,    // an equivalence check found a counterexample
  kCorruptData,     // malformed binary streams
  kNumeric,         // overflow / ill-conditioned solves
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mixflow
