#pragma once

#include <stdexcept>
#include <string>

namespace mmlc {

// Error taxonomy shared by the core library, the C API and the CLI.
enum class ErrorCode {
  Io,
  MalformedRow,
  UnknownReference,
  DuplicateLabel,
  EmptyDataset,
  IncompleteTruth,
  UnlabeledItem,
  InvalidConfig,
  DimensionMismatch,
  IndexOutOfRange,
  EmptyBatch,
  NumericalUnderflow,
  MissingTruth,
  UnknownWorker,
  MissingWeights,
  EmptyMatrix,
  UnknownMethod,
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

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mmlc
