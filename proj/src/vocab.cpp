#include "kgsum/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

namespace kgsum {

void Vocabulary::push(const std::string& token) {
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<AnnotatedDocument>& docs, int max_size) {
  std::map<std::string, long> counts;
  for (const auto& d : docs) {
    for (const auto& t : d.tokens) ++counts[t];
    for (const auto& t : d.reference_tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, long>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.push("<unk>");
  v.push("<s>");
  v.push("</s>");
  for (const auto& [tok, cnt] : sorted) {
    if (max_size > 0 && v.size() >= max_size) break;
    if (!v.contains(tok)) v.push(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  v.push("<unk>");
  v.push("<s>");
  v.push("</s>");
  for (const auto& t : tokens)
    if (!v.contains(t)) v.push(t);
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::ids(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
  for (const auto& t : id_to_token_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocabulary: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) v.push(line);
  if (v.size() < 3 || v.token(0) != "<unk>")
    throw std::runtime_error("vocabulary file is missing reserved symbols: " + path);
  return v;
}

ExtendedVocab ExtendedVocab::build(const Vocabulary& vocab,
                                   const std::vector<std::string>& src_tokens) {
  ExtendedVocab ext;
  ext.base_size = vocab.size();
  std::unordered_map<std::string, int> oov_ids;
  for (const auto& tok : src_tokens) {
    if (vocab.contains(tok)) {
      ext.src_ext_ids.push_back(vocab.id(tok));
    } else {
      auto it = oov_ids.find(tok);
      if (it == oov_ids.end()) {
        int id = ext.base_size + static_cast<int>(ext.oov_surfaces.size());
        oov_ids.emplace(tok, id);
        ext.oov_surfaces.push_back(tok);
        ext.src_ext_ids.push_back(id);
      } else {
        ext.src_ext_ids.push_back(it->second);
      }
    }
  }
  return ext;
}

int ExtendedVocab::target_id(const Vocabulary& vocab, const std::string& token) const {
  if (vocab.contains(token)) return vocab.id(token);
  for (size_t i = 0; i < oov_surfaces.size(); ++i)
    if (oov_surfaces[i] == token) return base_size + static_cast<int>(i);
  return Vocabulary::kUnk;
}

std::string ExtendedVocab::surface(const Vocabulary& vocab, int ext_id) const {
  if (ext_id < base_size) return vocab.token(ext_id);
  return oov_surfaces.at(ext_id - base_size);
}

}  // namespace kgsum
