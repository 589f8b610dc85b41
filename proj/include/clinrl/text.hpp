#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace clinrl::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool contains_icase(std::string_view haystack, std::string_view needle);
bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Splits prose into sentence units on terminal punctuation and line breaks.
/// Decimal points and a few common abbreviations do not end a sentence.
/// This is the one segmenter used for claim extraction and saliency.
std::vector<std::string> split_sentences(std::string_view s);

/// Lower-cased word tokens; '-' joins alphanumerics and '.' joins digits,
/// so "COX-1" and "2.5" stay whole.
std::vector<std::string> tokenize(std::string_view s);

/// Sorted tokens that contain at least one digit.
std::vector<std::string> numeric_tokens(std::string_view s);

bool is_stopword(std::string_view token);

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace clinrl::text
