#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace explcal {

std::string ascii_lower(std::string_view s);

std::string_view trim(std::string_view s);

// Strips leading/trailing ASCII punctuation (quotes, periods, commas, ...).
std::string strip_outer_punct(std::string_view s);

// Strips one leading indefinite/definite article ("a ", "an ", "the ").
std::string_view strip_leading_article(std::string_view s);

bool starts_with_icase(std::string_view s, std::string_view prefix);

// Case-insensitive search; npos when absent.
size_t find_icase(std::string_view haystack, std::string_view needle, size_t from = 0);
size_t rfind_icase(std::string_view haystack, std::string_view needle);

// "a" or "an" by the initial-vowel rule.
std::string_view indefinite_article(std::string_view word);

// Case-folded comparison with terminal punctuation normalized away.
bool same_sentence(std::string_view a, std::string_view b);

// Lowercased word tokens, split on non-alphanumeric runs. Bytes >= 0x80
// are kept inside tokens so UTF-8 words survive intact (no case folding
// outside ASCII).
std::vector<std::string> word_tokens(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string sha256_hex(std::string_view data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);
// Write via temp file + rename so concurrent writers of the same key
// never expose partial content.
void write_file_atomic(const std::string& path, std::string_view data);

} // namespace explcal
