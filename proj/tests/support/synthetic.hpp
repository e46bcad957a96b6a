#pragma once

#include <random>
#include <string>
#include <vector>

#include <map>

#include "kgsum/cloze.hpp"
#include "kgsum/corpus.hpp"
#include "kgsum/graph.hpp"
#include "kgsum/text.hpp"

namespace kgsum::testsupport {

// --- independent brute-force reference builders -----------------------------
//
// Straightforward reimplementations of the graph-construction rules, kept
// deliberately naive (string keys, repeated scans) and separate from the
// library path they check.

std::vector<Triple> oracle_filter_triples(const std::vector<Triple>& triples,
                                          int max_arg_words = 10);

struct OracleNode {
  bool is_entity = true;
  std::vector<std::pair<int, int>> mentions;  // (start, end) per occurrence
};

struct OracleGraph {
  std::vector<OracleNode> nodes;
  std::vector<std::pair<int, int>> edges;  // sorted, deduplicated
};

OracleGraph oracle_build_doc_graph(const AnnotatedDocument& doc, int min_nodes);

std::vector<int> oracle_label_salience(const OracleGraph& g,
                                       const std::vector<std::string>& doc_tokens,
                                       const std::vector<std::string>& reference_tokens,
                                       const StopwordSet& stopwords);

// Canonical comparable form of a graph: per node "kind|m1|m2|..." signatures
// plus edges over node signatures (occurrence-disambiguated).
struct CanonicalGraph {
  std::vector<std::string> nodes;                      // sorted signatures
  std::vector<std::pair<std::string, std::string>> edges;  // sorted
  std::vector<std::pair<std::string, int>> salience;   // signature -> label, sorted

  bool operator==(const CanonicalGraph& o) const {
    return nodes == o.nodes && edges == o.edges && salience == o.salience;
  }
};

CanonicalGraph canonicalize(const kg::KnowledgeGraph& g, const std::vector<int>& salience);
CanonicalGraph canonicalize(const OracleGraph& g, const std::vector<int>& salience);

// Exhaustive subset search for the salient-context oracle: the maximum
// ROUGE-2 F1 over all sentence subsets (concatenated in document order).
double best_subset_rouge2_f1(const AnnotatedDocument& doc, std::vector<int>* best_subset);

// --- synthetic corpora -------------------------------------------------------

// Random annotated document with up to max_triples triples, coreference
// chains over repeated entity surfaces, and a reference drawn from the
// document vocabulary. All invariants hold by construction.
AnnotatedDocument random_document(std::mt19937_64& rng, int max_triples = 10);

// Tiny supervised corpus: each document verbalizes facts and its reference
// repeats a subset of them verbatim. Used by the overfit and RL
// experiments.
std::vector<AnnotatedDocument> toy_copy_corpus(int num_docs, std::uint64_t seed);

// Corpus whose references verbalize exactly the annotated triples, which are
// spread across paragraphs among structurally identical distractor
// sentences. Token-only models cannot tell salient sentences apart; the
// graph input identifies them.
std::vector<AnnotatedDocument> triple_salience_corpus(int num_docs, std::uint64_t seed);

// Fixture corpus for question-bank tests: documents with reference triples
// and enough context triples to mine distractors from.
std::vector<AnnotatedDocument> question_fixture_corpus(int num_docs, std::uint64_t seed);

// The worked distractor-construction example: reference triple
// <Federal Reserve, increases, interest rates> with a salient context
// providing the swap and replacement candidates.
AnnotatedDocument fed_example_document();

std::string corpus_to_jsonl(const std::vector<AnnotatedDocument>& docs);
void write_corpus(const std::vector<AnnotatedDocument>& docs, const std::string& path);

}  // namespace kgsum::testsupport

namespace kgsum::testsupport {

// Trivially separable 4-way QA bank: the correct answer's tokens appear in
// the context, distractor tokens never do.
struct QaBankFixture {
  std::vector<cloze::ClozeQuestion> questions;
  std::map<std::string, std::vector<std::string>> contexts;
};
QaBankFixture separable_qa_bank(int num_questions, std::uint64_t seed);

}  // namespace kgsum::testsupport
