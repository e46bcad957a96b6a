#include "kgsum/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kgsum {

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<std::string> lowercase_all(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lowercase(t));
  return out;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

namespace {

// Fallback used when data/stopwords.txt is not on disk (e.g. unit tests run
// from another directory). Kept in sync with the shipped file.
const char* kDefaultStopwords =
    "a an the and or but if while of to in on at by for with about against between "
    "into through during before after above below from up down out off over under "
    "again further then once here there when where why how all any both each few "
    "more most other some such no nor not only own same so than too very s t can "
    "will just don should now is are was were be been being have has had having do "
    "does did doing i me my myself we our ours ourselves you your yours yourself "
    "he him his himself she her hers herself it its itself they them their theirs "
    "themselves what which who whom this that these those am as until because "
    ". , ! ? ; : ' \" ` `` '' - -- ( ) [ ] { }";

}  // namespace

StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword file: " + path);
  StopwordSet set;
  std::string w;
  while (in >> w) set.insert(lowercase(w));
  return set;
}

const StopwordSet& builtin_stopwords() {
  static const StopwordSet set = [] {
    StopwordSet s;
    std::istringstream is(kDefaultStopwords);
    std::string w;
    while (is >> w) s.insert(w);
    return s;
  }();
  return set;
}

bool is_content_word(const std::string& token, const StopwordSet& stopwords) {
  std::string lower = lowercase(token);
  if (stopwords.count(lower)) return false;
  bool has_alpha = false;
  for (unsigned char c : lower)
    if (std::isalpha(c)) has_alpha = true;
  return has_alpha;
}

std::vector<std::string> content_words(const std::vector<std::string>& tokens,
                                       const StopwordSet& stopwords) {
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (is_content_word(t, stopwords)) out.push_back(lowercase(t));
  return out;
}

bool shares_content_word(const std::vector<std::string>& a, const std::vector<std::string>& b,
                         const StopwordSet& stopwords) {
  auto ca = content_words(a, stopwords);
  std::unordered_set<std::string> set(ca.begin(), ca.end());
  for (const auto& t : content_words(b, stopwords))
    if (set.count(t)) return true;
  return false;
}

std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace kgsum
