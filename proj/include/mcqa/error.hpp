#pragma once

#include <stdexcept>
#include <string>

namespace mcqa {

enum class ErrorKind {
    // ingest
    MalformedRow,
    AnswerKeyOutOfRange,
    DuplicateId,
    EmptyChoice,
    // perturbation
    UnsafePermutation,
    InvalidSwapSet,
    ImpossibleDerangement,
    SymbolSetTooSmall,
    // prompting
    TemplateUnknown,
    FewshotCountMismatch,
    SubjectMismatch,
    EmptyDevPool,
    DomainGroupExhausted,
    // scoring
    EmptyScores,
    NonPositiveNormalizer,
    // backend
    Transport,
    HttpStatus,
    SpanAlignment,
    RetryBudgetExhausted,
    CacheCorrupt,
    // metrics
    InsufficientPositions,
    ModelSetMismatch,
    UniverseMismatch,
    // harness
    ConfigInvalid,
    BackendUnavailable,
    MissingBaseline,
    IoError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

}  // namespace mcqa
