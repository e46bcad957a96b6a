#pragma once

#include <string>
#include <unordered_set>
#include <vector>

namespace kgsum {

using StopwordSet = std::unordered_set<std::string>;

std::string lowercase(const std::string& s);
std::vector<std::string> lowercase_all(const std::vector<std::string>& tokens);

// Whitespace split; inverse of join_tokens.
std::vector<std::string> split_words(const std::string& s);

// The built-in stopword list shipped with the repo (data/stopwords.txt).
// Includes function words and common punctuation tokens.
const StopwordSet& builtin_stopwords();
StopwordSet load_stopwords(const std::string& path);

// A content word is lowercased, not a stopword, and not pure punctuation
// or digits.
bool is_content_word(const std::string& token, const StopwordSet& stopwords);
std::vector<std::string> content_words(const std::vector<std::string>& tokens,
                                       const StopwordSet& stopwords);

// True iff the two token lists share at least one content word
// (case-insensitive).
bool shares_content_word(const std::vector<std::string>& a, const std::vector<std::string>& b,
                         const StopwordSet& stopwords);

// Stable 64-bit FNV-1a, used to derive per-document RNG streams.
std::uint64_t stable_hash(const std::string& s);

}  // namespace kgsum
