#include "mcqa/error.hpp"

namespace mcqa {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedRow: return "MalformedRow";
        case ErrorKind::AnswerKeyOutOfRange: return "AnswerKeyOutOfRange";
        case ErrorKind::DuplicateId: return "DuplicateId";
        case ErrorKind::EmptyChoice: return "EmptyChoice";
        case ErrorKind::UnsafePermutation: return "UnsafePermutation";
        case ErrorKind::InvalidSwapSet: return "InvalidSwapSet";
        case ErrorKind::ImpossibleDerangement: return "ImpossibleDerangement";
        case ErrorKind::SymbolSetTooSmall: return "SymbolSetTooSmall";
        case ErrorKind::TemplateUnknown: return "TemplateUnknown";
        case ErrorKind::FewshotCountMismatch: return "FewshotCountMismatch";
        case ErrorKind::SubjectMismatch: return "SubjectMismatch";
        case ErrorKind::EmptyDevPool: return "EmptyDevPool";
        case ErrorKind::DomainGroupExhausted: return "DomainGroupExhausted";
        case ErrorKind::EmptyScores: return "EmptyScores";
        case ErrorKind::NonPositiveNormalizer: return "NonPositiveNormalizer";
        case ErrorKind::Transport: return "Transport";
        case ErrorKind::HttpStatus: return "HttpStatus";
        case ErrorKind::SpanAlignment: return "SpanAlignment";
        case ErrorKind::RetryBudgetExhausted: return "RetryBudgetExhausted";
        case ErrorKind::CacheCorrupt: return "CacheCorrupt";
        case ErrorKind::InsufficientPositions: return "InsufficientPositions";
        case ErrorKind::ModelSetMismatch: return "ModelSetMismatch";
        case ErrorKind::UniverseMismatch: return "UniverseMismatch";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
        case ErrorKind::BackendUnavailable: return "BackendUnavailable";
        case ErrorKind::MissingBaseline: return "MissingBaseline";
        case ErrorKind::IoError: return "IoError";
    }
    return "UnknownError";
}

}  // namespace mcqa
