#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "kgsum/corpus.hpp"

namespace kgsum {

// Generation vocabulary. Ids 0..2 are reserved for <unk>, <s>, </s>; the
// rest are corpus tokens ordered by (count desc, surface asc) so builds are
// deterministic.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  static Vocabulary build(const std::vector<AnnotatedDocument>& docs, int max_size = 0);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }
  const std::string& token(int id) const { return id_to_token_.at(id); }
  int size() const { return static_cast<int>(id_to_token_.size()); }

  std::vector<int> ids(const std::vector<std::string>& tokens) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;

  void push(const std::string& token);
};

// Per-document extended vocabulary for the copy mechanism: source tokens
// absent from the generation vocabulary get temporary ids V, V+1, ...
struct ExtendedVocab {
  std::vector<int> src_ext_ids;           // per source position
  std::vector<std::string> oov_surfaces;  // ext id V+i -> surface
  int base_size = 0;

  static ExtendedVocab build(const Vocabulary& vocab, const std::vector<std::string>& src_tokens);

  int ext_size() const { return base_size + static_cast<int>(oov_surfaces.size()); }
  // Target id for a reference token: vocabulary id, else the document OOV
  // id, else <unk>.
  int target_id(const Vocabulary& vocab, const std::string& token) const;
  std::string surface(const Vocabulary& vocab, int ext_id) const;
};

}  // namespace kgsum
