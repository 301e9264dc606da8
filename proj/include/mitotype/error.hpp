#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mitotype {

/// Failure categories raised by the toolkit. Each maps to one diagnosable
/// condition so callers (and tests) can branch on the kind, not the text.
enum class ErrorCode {
    invalid_argument,
    empty_histogram,
    black_background,
    degenerate_stain_basis,
    non_square,
    empty_roi,
    image_too_small,
    empty_table,
    dimension_mismatch,
    unknown_label,
    duplicate_key,
    parse_error,
    incomplete_unit,
    degenerate_training_set,
    insufficient_trees,
    empty_patient,
    empty_class,
    degenerate_class,
    too_few_items,
    overcrowded_spec,
    io_error,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::empty_histogram: return "empty histogram";
    case ErrorCode::black_background: return "black background";
    case ErrorCode::degenerate_stain_basis: return "degenerate stain basis";
    case ErrorCode::non_square: return "non-square";
    case ErrorCode::empty_roi: return "empty ROI";
    case ErrorCode::image_too_small: return "image too small";
    case ErrorCode::empty_table: return "empty table";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::unknown_label: return "unknown label";
    case ErrorCode::duplicate_key: return "duplicate key";
    case ErrorCode::parse_error: return "parse error";
    case ErrorCode::incomplete_unit: return "incomplete unit";
    case ErrorCode::degenerate_training_set: return "degenerate training set";
    case ErrorCode::insufficient_trees: return "insufficient trees";
    case ErrorCode::empty_patient: return "empty patient";
    case ErrorCode::empty_class: return "empty class";
    case ErrorCode::degenerate_class: return "degenerate class";
    case ErrorCode::too_few_items: return "too few items";
    case ErrorCode::overcrowded_spec: return "overcrowded spec";
    case ErrorCode::io_error: return "I/O error";
    }
    return "unknown error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
          code_(code) {}
    explicit Error(ErrorCode code) : Error(code, std::string()) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace mitotype
