#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace slidewatch {

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// Case-folds UTF-8 text. Covers ASCII, Latin-1, Latin Extended-A, Greek and
/// Cyrillic; other codepoints pass through unchanged. Input is assumed to be
/// NFC-normalized (the fixture corpus is generated that way).
std::string fold_case_utf8(std::string_view text);

/// Collapses runs of whitespace to single spaces and trims the ends.
std::string collapse_whitespace(std::string_view text);

/// Lowercase+collapse, used as a cache/lookup key for place names.
std::string normalize_query(std::string_view text);

/// Number of non-whitespace codepoints in a UTF-8 string.
std::size_t count_nonspace_codepoints(std::string_view text);

/// Splits one CSV line. Handles double-quoted fields with "" escapes; no
/// multi-line fields (none of our file formats need them).
std::vector<std::string> split_csv_line(std::string_view line);

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

/// splitmix64 step; the standard finalizer-style generator.
std::uint64_t splitmix64(std::uint64_t& state);

/// Uniform double in [0, 1) from one splitmix64 step.
double splitmix_unit(std::uint64_t& state);

/// 32-hex-char content digest of a string (two independent 64-bit hashes).
std::string content_digest_hex(std::string_view bytes);

} // namespace slidewatch
