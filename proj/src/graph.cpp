#include "kgsum/graph.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace kgsum::kg {

namespace {

int word_count(const MentionSpan& s) { return static_cast<int>(split_words(s.surface).size()); }

bool tokens_overlap(const MentionSpan& a, const MentionSpan& b) {
  auto wa = split_words(lowercase(a.surface));
  auto wb = split_words(lowercase(b.surface));
  std::unordered_set<std::string> set(wa.begin(), wa.end());
  for (const auto& w : wb)
    if (set.count(w)) return true;
  return false;
}

bool same_surface(const MentionSpan& a, const MentionSpan& b) {
  return lowercase(a.surface) == lowercase(b.surface);
}

}  // namespace

std::vector<Triple> filter_triples(const std::vector<Triple>& triples, int max_arg_words) {
  std::vector<Triple> kept;
  for (const auto& t : triples) {
    if (word_count(t.subject) > max_arg_words || word_count(t.object) > max_arg_words) continue;
    kept.push_back(t);
  }

  // Pairwise dedup in document order: the loser is removed immediately so it
  // cannot knock out later triples.
  std::vector<bool> alive(kept.size(), true);
  for (size_t i = 0; i < kept.size(); ++i) {
    if (!alive[i]) continue;
    for (size_t j = i + 1; j < kept.size(); ++j) {
      if (!alive[i]) break;
      if (!alive[j]) continue;
      const Triple &a = kept[i], &b = kept[j];
      if (!same_surface(a.predicate, b.predicate)) continue;
      bool subj_same = same_surface(a.subject, b.subject);
      bool obj_same = same_surface(a.object, b.object);
      const MentionSpan *da = nullptr, *db = nullptr;
      if (subj_same && !obj_same) {
        da = &a.object;
        db = &b.object;
      } else if (!subj_same && obj_same) {
        da = &a.subject;
        db = &b.subject;
      } else {
        continue;  // identical or differing in both arguments
      }
      if (!tokens_overlap(*da, *db)) continue;
      // Keep the longer differing argument; ties keep the earlier triple.
      if (word_count(*db) > word_count(*da))
        alive[i] = false;
      else
        alive[j] = false;
    }
  }

  std::vector<Triple> out;
  for (size_t i = 0; i < kept.size(); ++i)
    if (alive[i]) out.push_back(kept[i]);
  return out;
}

namespace {

// Maps each argument span to its entity key. Spans covered by a coreference
// chain share the chain's key; everything else keys on its own span.
class EntityKeyer {
 public:
  explicit EntityKeyer(const std::vector<std::vector<MentionSpan>>& chains) {
    for (size_t c = 0; c < chains.size(); ++c)
      for (const auto& m : chains[c]) span_to_chain_[{m.start, m.end}] = static_cast<int>(c);
  }

  std::string key(const MentionSpan& s) const {
    auto it = span_to_chain_.find({s.start, s.end});
    if (it != span_to_chain_.end()) return "chain:" + std::to_string(it->second);
    return "span:" + std::to_string(s.start) + ":" + std::to_string(s.end);
  }

 private:
  std::map<std::pair<int, int>, int> span_to_chain_;
};

struct GraphBuilder {
  std::vector<Node> nodes;
  std::set<std::pair<int, int>> edges;
  std::map<std::string, int> entity_by_key;

  int entity_node(const std::string& key, const MentionSpan& mention) {
    auto it = entity_by_key.find(key);
    if (it != entity_by_key.end()) {
      nodes[it->second].mentions.push_back(mention);
      return it->second;
    }
    int id = static_cast<int>(nodes.size());
    nodes.push_back({id, NodeKind::entity, {mention}, mention.surface});
    entity_by_key.emplace(key, id);
    return id;
  }

  // Predicate instances are distinct events; never merged.
  int predicate_node(const MentionSpan& mention) {
    int id = static_cast<int>(nodes.size());
    nodes.push_back({id, NodeKind::predicate, {mention}, mention.surface});
    return id;
  }

  void add_triple_edges(int subj, int pred, int obj) {
    edges.insert({subj, pred});
    edges.insert({pred, subj});
    edges.insert({pred, obj});
    edges.insert({obj, pred});
  }

  KnowledgeGraph finish(int paragraph_index) {
    for (const auto& n : nodes) edges.insert({n.node_id, n.node_id});
    KnowledgeGraph g;
    g.nodes = std::move(nodes);
    g.edges.assign(edges.begin(), edges.end());
    g.paragraph_index = paragraph_index;
    return g;
  }
};

KnowledgeGraph build_from_triples(const std::vector<Triple>& triples, const EntityKeyer& keyer,
                                  int paragraph_index,
                                  std::map<std::string, int>* key_of_entity_node = nullptr) {
  GraphBuilder b;
  for (const auto& t : triples) {
    int subj = b.entity_node(keyer.key(t.subject), t.subject);
    int pred = b.predicate_node(t.predicate);
    int obj = b.entity_node(keyer.key(t.object), t.object);
    b.add_triple_edges(subj, pred, obj);
  }
  if (key_of_entity_node)
    for (const auto& [key, id] : b.entity_by_key) (*key_of_entity_node)[key] = id;
  return b.finish(paragraph_index);
}

// Weakly connected component ids, edge direction ignored.
std::vector<int> component_ids(const KnowledgeGraph& g) {
  int n = static_cast<int>(g.nodes.size());
  std::vector<std::vector<int>> adj(n);
  for (const auto& [a, b] : g.edges) {
    if (a != b) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  std::vector<int> comp(n, -1);
  int next = 0;
  for (int start = 0; start < n; ++start) {
    if (comp[start] != -1) continue;
    std::vector<int> stack{start};
    comp[start] = next;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (comp[v] == -1) {
          comp[v] = next;
          stack.push_back(v);
        }
    }
    ++next;
  }
  return comp;
}

}  // namespace

std::vector<std::vector<int>> KnowledgeGraph::neighborhoods() const {
  std::vector<std::vector<int>> nbrs(nodes.size());
  for (const auto& [a, b] : edges) nbrs[a].push_back(b);
  return nbrs;
}

bool SegGraphSet::all_empty() const {
  for (const auto& g : subgraphs)
    if (!g.empty()) return false;
  return true;
}

KnowledgeGraph build_doc_graph(const AnnotatedDocument& doc, int min_nodes) {
  EntityKeyer keyer(doc.coref_chains);
  KnowledgeGraph g = build_from_triples(doc.triples, keyer, -1);
  if (g.empty()) return g;

  auto comp = component_ids(g);
  std::vector<int> comp_size(*std::max_element(comp.begin(), comp.end()) + 1, 0);
  for (int c : comp) ++comp_size[c];

  std::vector<int> remap(g.nodes.size(), -1);
  KnowledgeGraph pruned;
  for (const auto& n : g.nodes) {
    if (comp_size[comp[n.node_id]] < min_nodes) continue;
    int id = static_cast<int>(pruned.nodes.size());
    remap[n.node_id] = id;
    Node copy = n;
    copy.node_id = id;
    pruned.nodes.push_back(std::move(copy));
  }
  for (const auto& [a, b] : g.edges)
    if (remap[a] != -1 && remap[b] != -1) pruned.edges.push_back({remap[a], remap[b]});
  std::sort(pruned.edges.begin(), pruned.edges.end());
  return pruned;
}

SegGraphSet build_seg_graphs(const AnnotatedDocument& doc) {
  SegGraphSet set;
  EntityKeyer keyer(doc.coref_chains);

  // Sentence -> paragraph containment.
  auto paragraph_of = [&](int sent) -> int {
    if (sent < 0 || sent >= static_cast<int>(doc.sentences.size())) return -1;
    const auto& s = doc.sentences[sent];
    for (size_t p = 0; p < doc.paragraphs.size(); ++p)
      if (s.start >= doc.paragraphs[p].start && s.end <= doc.paragraphs[p].end)
        return static_cast<int>(p);
    return -1;
  };

  std::vector<std::vector<Triple>> per_para(doc.paragraphs.size());
  for (const auto& t : doc.triples) {
    int p = paragraph_of(t.source_sentence);
    if (p >= 0) per_para[p].push_back(t);
  }

  for (size_t p = 0; p < per_para.size(); ++p) {
    std::map<std::string, int> entity_nodes;
    set.subgraphs.push_back(
        build_from_triples(per_para[p], keyer, static_cast<int>(p), &entity_nodes));
    for (const auto& [key, id] : entity_nodes)
      set.entity_map[key].push_back({static_cast<int>(p), id});
  }
  return set;
}

std::vector<int> label_node_salience(const KnowledgeGraph& graph,
                                     const std::vector<std::string>& reference_tokens,
                                     const StopwordSet& stopwords) {
  std::unordered_set<std::string> ref;
  for (const auto& t : reference_tokens) ref.insert(lowercase(t));

  std::vector<int> labels(graph.nodes.size(), 0);
  for (const auto& n : graph.nodes) {
    for (const auto& m : n.mentions) {
      for (const auto& w : split_words(lowercase(m.surface))) {
        if (stopwords.count(w)) continue;
        if (ref.count(w)) {
          labels[n.node_id] = 1;
          break;
        }
      }
      if (labels[n.node_id]) break;
    }
  }
  return labels;
}

std::string dump_graph(const std::string& doc_id, const KnowledgeGraph& graph,
                       const std::vector<int>& salience) {
  nlohmann::ordered_json j;
  j["doc_id"] = doc_id;
  if (graph.paragraph_index >= 0) j["paragraph"] = graph.paragraph_index;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : graph.nodes) {
    nlohmann::ordered_json jn;
    jn["id"] = n.node_id;
    jn["kind"] = n.kind == NodeKind::entity ? "entity" : "predicate";
    jn["mentions"] = nlohmann::ordered_json::array();
    for (const auto& m : n.mentions)
      jn["mentions"].push_back({{"start", m.start}, {"end", m.end}, {"surface", m.surface}});
    jn["count"] = n.mention_count();
    jn["salience"] = salience.empty() ? 0 : salience[n.node_id];
    j["nodes"].push_back(jn);
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& [a, b] : graph.edges) j["edges"].push_back({a, b});
  return j.dump();
}

}  // namespace kgsum::kg
