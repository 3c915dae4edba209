#include "askless/error.hpp"

namespace askless {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::MissingParentValue: return "MissingParentValue";
    case Errc::InvalidLevel: return "InvalidLevel";
    case Errc::IncompleteAssignment: return "IncompleteAssignment";
    case Errc::UnknownVariable: return "UnknownVariable";
    case Errc::InvalidTable: return "InvalidTable";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InconsistentConstraints: return "InconsistentConstraints";
    case Errc::TargetInEvidence: return "TargetInEvidence";
    case Errc::ZeroProbabilityEvidence: return "ZeroProbabilityEvidence";
    case Errc::AllZeroWeights: return "AllZeroWeights";
    case Errc::ConflictingEvidence: return "ConflictingEvidence";
    case Errc::MalformedDocument: return "MalformedDocument";
    case Errc::DuplicateAbbr: return "DuplicateAbbr";
    case Errc::MissingLabelVar: return "MissingLabelVar";
    case Errc::UnknownColumn: return "UnknownColumn";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::MissingUsageAnswer: return "MissingUsageAnswer";
    case Errc::ProfileSchemaMismatch: return "ProfileSchemaMismatch";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::UnlabeledTestSet: return "UnlabeledTestSet";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::QuestionNotInSet: return "QuestionNotInSet";
    case Errc::AlreadyAnswered: return "AlreadyAnswered";
    case Errc::ModelNotLoaded: return "ModelNotLoaded";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace askless
