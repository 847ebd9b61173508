#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedmeta {

enum class errc {
    shape_mismatch,
    dimension_mismatch,
    bad_magic,
    truncated_file,
    insufficient_samples,
    invalid_argument,
    non_positive_radius,
    divergence,
    breakdown_non_finite,
    empty_input,
    missing_data,
    invalid_config,
    io_error,
};

constexpr std::string_view to_string(errc code) noexcept {
    switch (code) {
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::bad_magic: return "BadMagic";
    case errc::truncated_file: return "TruncatedFile";
    case errc::insufficient_samples: return "InsufficientSamples";
    case errc::invalid_argument: return "InvalidArgument";
    case errc::non_positive_radius: return "NonPositiveRadius";
    case errc::divergence: return "Divergence";
    case errc::breakdown_non_finite: return "BreakdownNonFinite";
    case errc::empty_input: return "EmptyInput";
    case errc::missing_data: return "MissingData";
    case errc::invalid_config: return "InvalidConfig";
    case errc::io_error: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the `errc` kinds so
/// callers (and tests) can branch on the kind instead of the message text.
class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

    errc code() const noexcept { return code_; }
    /// The text without the leading kind.
    const std::string& message() const noexcept { return message_; }

private:
    errc code_;
    std::string message_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool condition, errc code, const std::string& what) {
    if (!condition) fail(code, what);
}

} // namespace fedmeta
