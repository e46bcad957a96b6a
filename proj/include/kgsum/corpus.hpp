#pragma once

#include <string>
#include <vector>

namespace kgsum {

// Half-open token span [start, end) with its surface string.
struct MentionSpan {
  int start = 0;
  int end = 0;
  std::string surface;

  bool operator==(const MentionSpan& o) const {
    return start == o.start && end == o.end;
  }
  int num_words() const { return end - start; }
};

struct Triple {
  MentionSpan subject;
  MentionSpan predicate;
  MentionSpan object;
  int source_sentence = -1;
};

struct TokenSpan {
  int start = 0;
  int end = 0;
};

// A document as delivered by the upstream annotation service: final subword
// tokens, paragraph/sentence segmentation, IE triples and coreference chains
// over those tokens, and the reference summary. The artifact never
// re-tokenizes or re-annotates.
struct AnnotatedDocument {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<TokenSpan> paragraphs;
  std::vector<TokenSpan> sentences;
  std::vector<Triple> triples;
  std::vector<std::vector<MentionSpan>> coref_chains;
  std::vector<std::string> reference_summary;  // sentence strings
  std::vector<std::string> reference_tokens;
  // Triples extracted from the reference summary by the same IE pipeline,
  // spans indexing reference_tokens, sentence indexing reference_summary.
  // Optional in the corpus file; empty when the annotator produced none.
  std::vector<Triple> reference_triples;
};

struct Diagnostic {
  std::string doc_id;
  std::string message;
};

struct LoadResult {
  std::vector<AnnotatedDocument> documents;
  std::vector<Diagnostic> diagnostics;
};

// Checks every type invariant and returns one diagnostic per violation.
// An empty result means the document is well formed.
std::vector<Diagnostic> validate_document(const AnnotatedDocument& doc);

// Truncates tokens to truncate_len, drops triples whose spans fall outside
// the truncated range, clips coreference chains to in-range mentions, and
// clips paragraph/sentence spans at the boundary.
AnnotatedDocument truncate_document(const AnnotatedDocument& doc, int truncate_len);

// Loads a line-delimited corpus file. Malformed lines are rejected with
// their line number; documents failing validation are skipped with a
// diagnostic. Surviving documents are truncated to truncate_len tokens.
LoadResult load_corpus(const std::string& path, int truncate_len);

// Parses a single corpus record (one JSON line). Throws std::runtime_error
// on schema violations.
AnnotatedDocument parse_record(const std::string& line);

// Pluggable boundary to the upstream annotator. The shipped implementation
// reads the corpus file format; anything that produces AnnotatedDocuments
// can stand in.
class AnnotationClient {
 public:
  virtual ~AnnotationClient() = default;
  virtual LoadResult load(int truncate_len) = 0;
};

class FileAnnotationClient : public AnnotationClient {
 public:
  explicit FileAnnotationClient(std::string path) : path_(std::move(path)) {}
  LoadResult load(int truncate_len) override { return load_corpus(path_, truncate_len); }

 private:
  std::string path_;
};

// Joins tokens[start:end) with single spaces; the canonical surface form.
std::string join_tokens(const std::vector<std::string>& tokens, int start, int end);

}  // namespace kgsum
