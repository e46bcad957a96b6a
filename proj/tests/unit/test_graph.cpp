#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "kgsum/graph.hpp"
#include "synthetic.hpp"

using namespace kgsum;
using namespace kgsum::kg;

namespace {

Triple make_triple(const std::vector<std::string>& tokens, int sb, int se, int pb, int pe, int ob,
                   int oe, int sent = 0) {
  Triple t;
  t.subject = {sb, se, join_tokens(tokens, sb, se)};
  t.predicate = {pb, pe, join_tokens(tokens, pb, pe)};
  t.object = {ob, oe, join_tokens(tokens, ob, oe)};
  t.source_sentence = sent;
  return t;
}

}  // namespace

TEST_CASE("filter_triples removes long arguments") {
  std::vector<std::string> tokens;
  for (int i = 0; i < 16; ++i) tokens.push_back("w" + std::to_string(i));
  // 11-word object.
  auto t = make_triple(tokens, 0, 1, 1, 2, 2, 13);
  CHECK(filter_triples({t}).empty());
  // 10-word object survives.
  auto ok = make_triple(tokens, 0, 1, 1, 2, 2, 12);
  CHECK(filter_triples({ok}).size() == 1);
}

TEST_CASE("filter_triples keeps the longer overlapping argument") {
  std::vector<std::string> tokens = {"alice", "likes", "the", "red", "car", "red", "car"};
  auto a = make_triple(tokens, 0, 1, 1, 2, 2, 5);  // object "the red car"
  auto b = make_triple(tokens, 0, 1, 1, 2, 5, 7);  // object "red car"
  auto kept = filter_triples({a, b});
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].object.surface == "the red car");
  // order independent
  kept = filter_triples({b, a});
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].object.surface == "the red car");
}

TEST_CASE("filter_triples tie keeps the earlier triple and leaves disjoint triples alone") {
  std::vector<std::string> tokens = {"a", "likes", "red", "car", "red", "cab", "b", "sees", "c"};
  auto first = make_triple(tokens, 0, 1, 1, 2, 2, 4);   // "red car"
  auto second = make_triple(tokens, 0, 1, 1, 2, 4, 6);  // "red cab" (same length, overlaps)
  auto other = make_triple(tokens, 6, 7, 7, 8, 8, 9);
  auto kept = filter_triples({first, second, other});
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].object.surface == "red car");
  CHECK(kept[1].subject.surface == "b");
}

TEST_CASE("build_doc_graph: one triple yields 3 nodes and 7 directed edges") {
  AnnotatedDocument d;
  d.tokens = {"a", "r", "b"};
  d.sentences = {{0, 3}};
  d.paragraphs = {{0, 3}};
  d.triples = {make_triple(d.tokens, 0, 1, 1, 2, 2, 3)};
  auto g = build_doc_graph(d, 3);
  CHECK(g.nodes.size() == 3);
  CHECK(g.edges.size() == 7);  // 2 forward + 2 reverse + 3 self-loops

  // min_nodes above the component size prunes everything.
  auto empty = build_doc_graph(d, 4);
  CHECK(empty.empty());
}

TEST_CASE("coreferent subjects collapse into one node with both mentions") {
  AnnotatedDocument d;
  d.tokens = {"alice", "likes", "bob", "she", "visits", "carol"};
  d.sentences = {{0, 3}, {3, 6}};
  d.paragraphs = {{0, 6}};
  d.triples = {make_triple(d.tokens, 0, 1, 1, 2, 2, 3, 0),
               make_triple(d.tokens, 3, 4, 4, 5, 5, 6, 1)};
  d.coref_chains = {{{0, 1, "alice"}, {3, 4, "she"}}};
  auto g = build_doc_graph(d, 1);
  int entity_nodes = 0;
  const Node* merged = nullptr;
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::entity) {
      ++entity_nodes;
      if (n.mention_count() == 2) merged = &n;
    }
  CHECK(entity_nodes == 3);  // alice/she, bob, carol
  REQUIRE(merged != nullptr);
  CHECK(merged->canonical_text == "alice");
}

TEST_CASE("build_seg_graphs partitions by paragraph and maps cross-paragraph entities") {
  AnnotatedDocument d;
  d.tokens = {"alice", "likes", "bob", ".", "carol", "sees", "dave", ".", "alice", "meets",
              "erin", "."};
  d.sentences = {{0, 4}, {4, 8}, {8, 12}};
  d.paragraphs = {{0, 4}, {4, 8}, {8, 12}};
  d.triples = {make_triple(d.tokens, 0, 1, 1, 2, 2, 3, 0),
               make_triple(d.tokens, 8, 9, 9, 10, 10, 11, 2)};
  d.coref_chains = {{{0, 1, "alice"}, {8, 9, "alice"}}};
  auto seg = build_seg_graphs(d);
  REQUIRE(seg.subgraphs.size() == 3);
  CHECK(seg.subgraphs[0].nodes.size() == 3);
  CHECK(seg.subgraphs[1].empty());
  CHECK(seg.subgraphs[2].nodes.size() == 3);
  CHECK(seg.subgraphs[0].paragraph_index == 0);

  // One chain key appearing in paragraphs 0 and 2.
  bool found = false;
  for (const auto& [key, occs] : seg.entity_map) {
    if (occs.size() == 2) {
      found = true;
      CHECK(occs[0].first == 0);
      CHECK(occs[1].first == 2);
    }
  }
  CHECK(found);

  AnnotatedDocument empty_doc;
  empty_doc.tokens = {"x"};
  CHECK(build_seg_graphs(empty_doc).subgraphs.empty());
}

TEST_CASE("label_node_salience uses lowercase exact matching of content words") {
  AnnotatedDocument d;
  d.tokens = {"Federal", "Reserve", "raises", "the", "rates", "interest", "rates"};
  d.sentences = {{0, 7}};
  d.paragraphs = {{0, 7}};
  d.triples = {make_triple(d.tokens, 0, 2, 2, 3, 5, 7)};
  auto g = build_doc_graph(d, 1);
  const auto& stop = builtin_stopwords();

  auto labels = label_node_salience(g, {"federal", "budget"}, stop);
  std::map<std::string, int> by_text;
  for (const auto& n : g.nodes) by_text[n.canonical_text] = labels[n.node_id];
  CHECK(by_text["Federal Reserve"] == 1);
  CHECK(by_text["interest rates"] == 0);

  // Stopword-only node -> 0.
  AnnotatedDocument d2;
  d2.tokens = {"the", "of", "likes", "bob"};
  d2.sentences = {{0, 4}};
  d2.paragraphs = {{0, 4}};
  d2.triples = {make_triple(d2.tokens, 0, 2, 2, 3, 3, 4)};
  auto g2 = build_doc_graph(d2, 1);
  auto labels2 = label_node_salience(g2, {"the", "of"}, stop);
  for (const auto& n : g2.nodes)
    if (n.canonical_text == "the of") CHECK(labels2[n.node_id] == 0);

  // Exact match only: "rates" does not match reference "rate".
  auto labels3 = label_node_salience(g, {"rate", "hike", "expected"}, stop);
  for (const auto& n : g.nodes)
    if (n.canonical_text == "interest rates") CHECK(labels3[n.node_id] == 0);
}

TEST_CASE("graph invariants: edge symmetry, self-loops, collapsing soundness, pruning monotonicity") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    auto doc = testsupport::random_document(rng);
    doc.triples = filter_triples(doc.triples);
    auto g = build_doc_graph(doc, 1 + static_cast<int>(rng() % 4));

    std::set<std::pair<int, int>> edges(g.edges.begin(), g.edges.end());
    for (const auto& n : g.nodes) CHECK(edges.count({n.node_id, n.node_id}) == 1);
    for (const auto& [a, b] : edges)
      if (a != b) CHECK(edges.count({b, a}) == 1);

    // Mention multiset equals the retained triple argument multiset, after
    // pruning is undone (min_nodes=1).
    auto full = build_doc_graph(doc, 1);
    std::multiset<std::pair<int, int>> got, want;
    for (const auto& n : full.nodes)
      if (n.kind == NodeKind::entity)
        for (const auto& m : n.mentions) got.insert({m.start, m.end});
    for (const auto& t : doc.triples) {
      want.insert({t.subject.start, t.subject.end});
      want.insert({t.object.start, t.object.end});
    }
    CHECK(got == want);

    // Raising min_nodes never increases node count.
    size_t prev = full.nodes.size();
    for (int mn = 2; mn <= 5; ++mn) {
      auto pruned = build_doc_graph(doc, mn);
      CHECK(pruned.nodes.size() <= prev);
      prev = pruned.nodes.size();
    }
  }
}

TEST_CASE("brute-force equivalence on random documents") {
  std::mt19937_64 rng(123);
  const auto& stop = builtin_stopwords();
  for (int trial = 0; trial < 50; ++trial) {
    auto doc = testsupport::random_document(rng);
    doc.triples = testsupport::oracle_filter_triples(doc.triples);
    int min_nodes = 1 + static_cast<int>(rng() % 4);

    auto g = build_doc_graph(doc, min_nodes);
    auto labels = label_node_salience(g, doc.reference_tokens, stop);
    auto og = testsupport::oracle_build_doc_graph(doc, min_nodes);
    auto olabels = testsupport::oracle_label_salience(og, doc.tokens, doc.reference_tokens, stop);

    CHECK(testsupport::canonicalize(g, labels) == testsupport::canonicalize(og, olabels));
  }
}

TEST_CASE("filter_triples agrees with the oracle filter") {
  std::mt19937_64 rng(321);
  for (int trial = 0; trial < 80; ++trial) {
    auto doc = testsupport::random_document(rng);
    auto ours = kg::filter_triples(doc.triples);
    auto oracle = testsupport::oracle_filter_triples(doc.triples);
    REQUIRE(ours.size() == oracle.size());
    for (size_t i = 0; i < ours.size(); ++i) {
      CHECK(ours[i].subject == oracle[i].subject);
      CHECK(ours[i].predicate == oracle[i].predicate);
      CHECK(ours[i].object == oracle[i].object);
    }
  }
}

TEST_CASE("graph dump is stable json lines") {
  AnnotatedDocument d;
  d.tokens = {"apple", "ripens", "b"};
  d.sentences = {{0, 3}};
  d.paragraphs = {{0, 3}};
  d.triples = {make_triple(d.tokens, 0, 1, 1, 2, 2, 3)};
  auto g = build_doc_graph(d, 1);
  auto labels = label_node_salience(g, {"apple"}, builtin_stopwords());
  std::string dump = dump_graph("d0", g, labels);
  CHECK(dump.find("\"doc_id\":\"d0\"") != std::string::npos);
  CHECK(dump.find("\"salience\":1") != std::string::npos);
  CHECK(dump == dump_graph("d0", g, labels));
}
