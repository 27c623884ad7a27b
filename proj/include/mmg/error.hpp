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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmg {

enum class ErrorCode {
  // graph-core
  kDuplicateKey,
  kDimensionMismatch,
  kNonFiniteFeature,
  kSelfLoop,
  kKindMismatch,
  kDuplicateEdge,
  kUnknownNode,
  kFrozenGraph,
  // corpus-ingest / file formats
  kEmptyAfterNormalization,
  kZeroVector,
  kEmptyCorpus,
  kParseError,
  kIoFailure,
  kBadMagic,
  kUnsupportedVersion,
  kChecksumMismatch,
  // encoder / trainer
  kShapeMismatch,
  kNonFiniteActivation,
  kNonFiniteInput,
  kDegenerateGraph,
  kInvalidConfig,
  // index / query
  kEmptyTable,
  kZeroQuery,
  kNoResolvableTags,
  kMissingImageFeature,
  kEmptyQuery,
  // eval
  kMissingRanks,
  kNoQueries,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mmg
