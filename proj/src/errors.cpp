#include "errors.hpp"

namespace mmlc {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "IoError";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::UnknownReference: return "UnknownReference";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::IncompleteTruth: return "IncompleteTruth";
    case ErrorCode::UnlabeledItem: return "UnlabeledItem";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::MissingTruth: return "MissingTruth";
    case ErrorCode::UnknownWorker: return "UnknownWorker";
    case ErrorCode::MissingWeights: return "MissingWeights";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
  }
  return "Unknown";
}

}  // namespace mmlc
