#include "clinrl/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace clinrl::text {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

constexpr std::array<std::string_view, 9> kAbbreviations = {
    "dr", "mr", "mrs", "ms", "vs", "etc", "e.g", "i.e", "approx"};

// "A." / "(b." / "12." at the start of a line label a list item.
bool is_list_marker(std::string_view sentence) {
  sentence = trim(sentence);
  if (!sentence.empty() && sentence.front() == '(') sentence.remove_prefix(1);
  if (sentence.size() == 1) return is_alnum(sentence[0]);
  return !sentence.empty() && sentence.size() <= 3 && std::all_of(sentence.begin(), sentence.end(), is_digit);
}

bool ends_with_abbreviation(std::string_view sentence) {
  std::size_t start = sentence.size();
  while (start > 0 && !is_space(sentence[start - 1])) --start;
  const std::string word = to_lower(sentence.substr(start));
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool contains_icase(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (prefix.size() > s.size()) return false;
  return to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    const auto t = trim(current);
    if (!t.empty()) out.emplace_back(t);
    current.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\n' || c == '\r') {
      flush();
      continue;
    }
    current.push_back(c);
    if (c != '.' && c != '!' && c != '?') continue;
    const bool at_end = i + 1 == s.size();
    const bool before_space = !at_end && is_space(s[i + 1]);
    if (!at_end && !before_space) continue;
    if (c == '.') {
      const auto body = std::string_view(current).substr(0, current.size() - 1);
      if (ends_with_abbreviation(body) || is_list_marker(body)) continue;
    }
    flush();
  }
  flush();
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (is_alnum(c)) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      continue;
    }
    const bool has_next = i + 1 < s.size();
    if (!current.empty() && has_next && c == '-' && is_alnum(s[i + 1])) {
      current.push_back(c);
      continue;
    }
    if (!current.empty() && has_next && c == '.' && is_digit(current.back()) && is_digit(s[i + 1])) {
      current.push_back(c);
      continue;
    }
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<std::string> numeric_tokens(std::string_view s) {
  std::vector<std::string> out;
  for (auto& t : tokenize(s)) {
    if (std::any_of(t.begin(), t.end(), is_digit)) out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_stopword(std::string_view token) {
  static constexpr std::array<std::string_view, 22> kStop = {
      "a",  "an", "and", "are", "as",   "at",    "be",    "by",   "for",  "in",   "is",
      "it", "its", "of", "on",  "or",   "that",  "the",   "this", "to",   "with", "also"};
  return std::find(kStop.begin(), kStop.end(), token) != kStop.end();
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace clinrl::text
