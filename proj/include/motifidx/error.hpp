#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace motifidx {

enum class Errc {
    // corpus / common
    InvalidInput,
    Io,
    // align
    WindowTooLarge,
    CursorExhausted,
    EmptyGold,
    // motif-index
    MalformedId,
    DuplicateId,
    LabelConflict,
    // retrieval
    EmptyCorpus,
    UnknownSentence,
    DimMismatch,
    ZeroVector,
    // classifiers
    EmptyCalibrationSet,
    EmptyShots,
    UnparseableVerdict,
    // metrics
    LengthMismatch,
    InsufficientNegatives,
    InfeasibleTargets,
    MissingLabel,
    // annotation-store
    UnknownReference,
    EmptyQueue,
    NotAssigned,
    DuplicateRecord,
    MissingExpression,
    NotInQueue,
    // gateway / providers
    InvalidConfig,
    ProviderError,
    ProviderTimeout,
    SchemaViolation,
    Transport,
};

/// Upper-snake wire name of a code, e.g. "MISSING_EXPRESSION".
std::string_view code_name(Errc code) noexcept;

/// Every failure raised by the library. `module` is the owning module
/// ("corpus", "align", ...) so that reports can print `align.WINDOW_TOO_LARGE`.
class Error : public std::runtime_error {
public:
    Error(std::string module, Errc code, const std::string& message)
        : std::runtime_error(message), module_(std::move(module)), code_(code)
    {}

    const std::string& module() const noexcept { return module_; }
    Errc code() const noexcept { return code_; }
    std::string qualified_code() const;

private:
    std::string module_;
    Errc code_;
};

} // namespace motifidx
