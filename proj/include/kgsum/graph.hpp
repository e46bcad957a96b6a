#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kgsum/corpus.hpp"
#include "kgsum/text.hpp"

namespace kgsum::kg {

enum class NodeKind { entity, predicate };

struct Node {
  int node_id = 0;
  NodeKind kind = NodeKind::entity;
  std::vector<MentionSpan> mentions;  // one entry per triple-argument occurrence
  std::string canonical_text;         // first mention's surface
  int mention_count() const { return static_cast<int>(mentions.size()); }
};

// Directed graph over entity and predicate nodes. Every retained triple
// contributes subject->predicate and predicate->object edges plus their
// reverses; every node carries a self-loop. Edges are kept sorted and
// deduplicated.
struct KnowledgeGraph {
  std::vector<Node> nodes;
  std::vector<std::pair<int, int>> edges;
  int paragraph_index = -1;  // >= 0 iff this is a SegGraph subgraph

  bool empty() const { return nodes.empty(); }
  // Neighbor lists derived from the edge set: nbrs[i] = {j : (i,j) in edges}.
  std::vector<std::vector<int>> neighborhoods() const;
};

struct SegGraphSet {
  std::vector<KnowledgeGraph> subgraphs;  // one per paragraph, in order
  // Entity key -> (subgraph index, node id) occurrences, in paragraph order.
  // Keys are "chain:<i>" for chain-collapsed entities and "span:<s>:<e>"
  // otherwise, so coreferent nodes across subgraphs share one key.
  std::map<std::string, std::vector<std::pair<int, int>>> entity_map;

  bool all_empty() const;
};

// Drops triples whose subject or object exceeds max_arg_words words, then
// applies the dedup rule: among two triples that differ in exactly one
// argument whose surfaces share at least one token (case-insensitive), the
// one with more words in the differing argument survives; ties keep the
// earlier triple. Pairs are processed in document order.
std::vector<Triple> filter_triples(const std::vector<Triple>& triples, int max_arg_words = 10);

// Builds the document-level graph from already-filtered triples. Entity
// arguments covered by the same coreference chain collapse into one node.
// Weakly connected components smaller than min_nodes are pruned; the result
// may be empty.
KnowledgeGraph build_doc_graph(const AnnotatedDocument& doc, int min_nodes);

// One subgraph per paragraph, from triples whose source sentence lies in
// that paragraph. No pruning inside subgraphs.
SegGraphSet build_seg_graphs(const AnnotatedDocument& doc);

// Gold salience: 1 iff any non-stopword mention token occurs (lowercased,
// exact match) in the reference tokens.
std::vector<int> label_node_salience(const KnowledgeGraph& graph,
                                     const std::vector<std::string>& reference_tokens,
                                     const StopwordSet& stopwords);

// Debug/golden-test dump: one JSON line per graph.
std::string dump_graph(const std::string& doc_id, const KnowledgeGraph& graph,
                       const std::vector<int>& salience);

}  // namespace kgsum::kg
