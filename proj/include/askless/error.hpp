#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace askless {

enum class Errc {
  CycleDetected,
  UnknownNode,
  DuplicateEdge,
  SelfLoop,
  MissingParentValue,
  InvalidLevel,
  IncompleteAssignment,
  UnknownVariable,
  InvalidTable,
  EmptyDataset,
  InconsistentConstraints,
  TargetInEvidence,
  ZeroProbabilityEvidence,
  AllZeroWeights,
  ConflictingEvidence,
  MalformedDocument,
  DuplicateAbbr,
  MissingLabelVar,
  UnknownColumn,
  MissingColumn,
  EmptyFile,
  MissingUsageAnswer,
  ProfileSchemaMismatch,
  InvalidConfig,
  LengthMismatch,
  UnknownClass,
  KTooLarge,
  UnlabeledTestSet,
  UnknownSession,
  QuestionNotInSet,
  AlreadyAnswered,
  ModelNotLoaded,
  Io,
};

std::string_view to_string(Errc code);

// Every failure in the library surfaces as this exception; `code()` tells
// callers (CLI exit codes, HTTP status mapping) which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace askless
