#include "motifidx/error.hpp"
#include "motifidx/types.hpp"

#include <algorithm>
#include <cctype>

namespace motifidx {

std::string_view code_name(Errc code) noexcept
{
    switch (code) {
    case Errc::InvalidInput: return "INVALID_INPUT";
    case Errc::Io: return "IO";
    case Errc::WindowTooLarge: return "WINDOW_TOO_LARGE";
    case Errc::CursorExhausted: return "CURSOR_EXHAUSTED";
    case Errc::EmptyGold: return "EMPTY_GOLD";
    case Errc::MalformedId: return "MALFORMED_ID";
    case Errc::DuplicateId: return "DUPLICATE_ID";
    case Errc::LabelConflict: return "LABEL_CONFLICT";
    case Errc::EmptyCorpus: return "EMPTY_CORPUS";
    case Errc::UnknownSentence: return "UNKNOWN_SENTENCE";
    case Errc::DimMismatch: return "DIM_MISMATCH";
    case Errc::ZeroVector: return "ZERO_VECTOR";
    case Errc::EmptyCalibrationSet: return "EMPTY_CALIBRATION_SET";
    case Errc::EmptyShots: return "EMPTY_SHOTS";
    case Errc::UnparseableVerdict: return "UNPARSEABLE_VERDICT";
    case Errc::LengthMismatch: return "LENGTH_MISMATCH";
    case Errc::InsufficientNegatives: return "INSUFFICIENT_NEGATIVES";
    case Errc::InfeasibleTargets: return "INFEASIBLE_TARGETS";
    case Errc::MissingLabel: return "MISSING_LABEL";
    case Errc::UnknownReference: return "UNKNOWN_REFERENCE";
    case Errc::EmptyQueue: return "EMPTY_QUEUE";
    case Errc::NotAssigned: return "NOT_ASSIGNED";
    case Errc::DuplicateRecord: return "DUPLICATE_RECORD";
    case Errc::MissingExpression: return "MISSING_EXPRESSION";
    case Errc::NotInQueue: return "NOT_IN_QUEUE";
    case Errc::InvalidConfig: return "INVALID_CONFIG";
    case Errc::ProviderError: return "PROVIDER_ERROR";
    case Errc::ProviderTimeout: return "PROVIDER_TIMEOUT";
    case Errc::SchemaViolation: return "SCHEMA_VIOLATION";
    case Errc::Transport: return "TRANSPORT";
    }
    return "UNKNOWN";
}

std::string Error::qualified_code() const
{
    return module_ + "." + std::string(code_name(code_));
}

std::string_view to_string(Label label) noexcept
{
    return label == Label::Positive ? "POSITIVE" : "NEGATIVE";
}

std::string_view to_string(Complexity c) noexcept
{
    return c == Complexity::Simple ? "SIMPLE" : "COMPLEX";
}

namespace {
std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}
} // namespace

std::optional<Label> parse_label(std::string_view s) noexcept
{
    const auto u = upper(s);
    if (u == "POSITIVE" || u == "YES" || u == "TRUE" || u == "1") {
        return Label::Positive;
    }
    if (u == "NEGATIVE" || u == "NO" || u == "FALSE" || u == "0") {
        return Label::Negative;
    }
    return std::nullopt;
}

std::optional<Complexity> parse_complexity(std::string_view s) noexcept
{
    const auto u = upper(s);
    if (u == "SIMPLE") {
        return Complexity::Simple;
    }
    if (u == "COMPLEX") {
        return Complexity::Complex;
    }
    return std::nullopt;
}

std::optional<PairId> PairId::from_key(std::string_view key)
{
    const auto colon = key.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == key.size()) {
        return std::nullopt;
    }
    return PairId{std::string(key.substr(0, colon)), std::string(key.substr(colon + 1))};
}

} // namespace motifidx
