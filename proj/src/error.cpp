/* Copyright 2026 The mmgraph Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "mmg/error.hpp"

namespace mmg {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::kSelfLoop: return "SelfLoop";
    case ErrorCode::kKindMismatch: return "KindMismatch";
    case ErrorCode::kDuplicateEdge: return "DuplicateEdge";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kFrozenGraph: return "FrozenGraph";
    case ErrorCode::kEmptyAfterNormalization: return "EmptyAfterNormalization";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kDegenerateGraph: return "DegenerateGraph";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kEmptyTable: return "EmptyTable";
    case ErrorCode::kZeroQuery: return "ZeroQuery";
    case ErrorCode::kNoResolvableTags: return "NoResolvableTags";
    case ErrorCode::kMissingImageFeature: return "MissingImageFeature";
    case ErrorCode::kEmptyQuery: return "EmptyQuery";
    case ErrorCode::kMissingRanks: return "MissingRanks";
    case ErrorCode::kNoQueries: return "NoQueries";
  }
  return "Unknown";
}

}  // namespace mmg
