#include "kgsum/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kgsum/text.hpp"

namespace kgsum::model {

using nn::Matrix;
using nn::Tape;
using nn::Value;

Variant variant_from_string(const std::string& s) {
  if (s == "nograph") return Variant::nograph;
  if (s == "docgraph") return Variant::docgraph;
  if (s == "seggraph") return Variant::seggraph;
  throw std::invalid_argument("unknown model variant: " + s);
}

std::string variant_to_string(Variant v) {
  switch (v) {
    case Variant::nograph: return "nograph";
    case Variant::docgraph: return "docgraph";
    case Variant::seggraph: return "seggraph";
  }
  return "?";
}

Matrix HashedEmbeddingProvider::embed(const std::vector<std::string>& tokens) const {
  Matrix out(dim_, tokens.size());
  for (size_t j = 0; j < tokens.size(); ++j) {
    std::mt19937_64 rng(stable_hash(tokens[j]) ^ seed_);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (int i = 0; i < dim_; ++i) out(i, j) = dist(rng);
  }
  return out;
}

void ModelConfig::validate() const {
  if (vocab_size < 3) throw std::invalid_argument("vocab_size must cover the reserved symbols");
  if (embed_dim <= 0 || hidden_dim <= 0 || attn_dim <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (hidden_dim % 2 != 0) throw std::invalid_argument("hidden_dim must be even");
  if (has_graph_encoder() && (num_heads <= 0 || head_dim <= 0 || num_layers <= 0))
    throw std::invalid_argument("graph encoder dimensions must be positive");
  if (count_buckets < 1) throw std::invalid_argument("count_buckets must be >= 1");
}

Summarizer::Lstm Summarizer::make_lstm(const std::string& prefix, int in_dim, int hidden) {
  Lstm l;
  l.wx = &params_.create(prefix + ".wx", 4 * hidden, in_dim);
  l.wh = &params_.create(prefix + ".wh", 4 * hidden, hidden);
  l.b = &params_.create(prefix + ".b", 4 * hidden, 1);
  return l;
}

Summarizer::Summarizer(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  int h = cfg_.hidden_dim;
  int h2 = h / 2;
  int nd = cfg_.node_dim();
  int a = cfg_.attn_dim;

  params_.create("embed.table", cfg_.vocab_size, cfg_.embed_dim);
  enc_fwd_ = make_lstm("enc.fwd", cfg_.enc_in_dim(), h2);
  enc_bwd_ = make_lstm("enc.bwd", cfg_.enc_in_dim(), h2);

  if (cfg_.has_graph_encoder()) {
    params_.create("nodes.proj", nd, h);
    params_.create("nodes.count", cfg_.count_buckets, nd);
    params_.create("nodes.mask", 1, nd);
    for (int l = 0; l < cfg_.num_layers; ++l) {
      for (int n = 0; n < cfg_.num_heads; ++n) {
        std::string p = "gat.l" + std::to_string(l) + ".h" + std::to_string(n);
        params_.create(p + ".value", cfg_.head_dim, nd);
        params_.create(p + ".key", cfg_.head_dim, nd);
        params_.create(p + ".query", cfg_.head_dim, nd);
      }
    }
    params_.create("attn.graph.state", a, h);
    params_.create("attn.graph.node", a, nd);
    params_.create("attn.graph.probe", a, 1);
    params_.create("attn.doc.graph", a, nd);
  }
  if (cfg_.variant == Variant::seggraph) {
    params_.create("seg.null", nd, 1);
    seg_fwd_ = make_lstm("seg.fwd", nd, h2);
    seg_bwd_ = make_lstm("seg.bwd", nd, h2);
    params_.create("attn.sub.state", a, h);
    params_.create("attn.sub.graph", a, h);
    params_.create("attn.sub.probe", a, 1);
  }

  params_.create("attn.doc.state", a, h);
  params_.create("attn.doc.token", a, h);
  params_.create("attn.doc.probe", a, 1);

  dec_ = make_lstm("dec.lstm", cfg_.embed_dim, h);
  params_.create("dec.bridge_h", h, h);
  params_.create("dec.bridge_c", h, h);

  int feat = h + h + (cfg_.has_graph_encoder() ? nd : 0);
  params_.create("out.proj", cfg_.embed_dim, feat);
  params_.create("copy.proj", 1, feat + cfg_.embed_dim);

  params_.init_uniform(init_seed);
}

std::pair<Value, Value> Summarizer::lstm_step(Tape& t, Value wx, Value wh, Value b, Value x,
                                              Value h, Value c) {
  int hid = t.rows(h);
  Value z = t.add(t.add(t.matmul(wx, x), t.matmul(wh, h)), b);
  Value i = t.sigmoid_(t.rows_range(z, 0, hid));
  Value f = t.sigmoid_(t.rows_range(z, hid, 2 * hid));
  Value g = t.tanh_(t.rows_range(z, 2 * hid, 3 * hid));
  Value o = t.sigmoid_(t.rows_range(z, 3 * hid, 4 * hid));
  Value c2 = t.add(t.cmul(f, c), t.cmul(i, g));
  Value h2 = t.cmul(o, t.tanh_(c2));
  return {h2, c2};
}

Value Summarizer::bilstm(Tape& t, const Lstm& fwd, const Lstm& bwd, Value inputs, int hidden) {
  int T = t.cols(inputs);
  Value fwx = t.param(*fwd.wx), fwh = t.param(*fwd.wh), fb = t.param(*fwd.b);
  Value bwx = t.param(*bwd.wx), bwh = t.param(*bwd.wh), bb = t.param(*bwd.b);

  std::vector<Value> fstates(T), bstates(T);
  Value h = t.zeros(hidden, 1), c = t.zeros(hidden, 1);
  for (int k = 0; k < T; ++k) {
    auto [h2, c2] = lstm_step(t, fwx, fwh, fb, t.col(inputs, k), h, c);
    h = h2;
    c = c2;
    fstates[k] = h;
  }
  h = t.zeros(hidden, 1);
  c = t.zeros(hidden, 1);
  for (int k = T - 1; k >= 0; --k) {
    auto [h2, c2] = lstm_step(t, bwx, bwh, bb, t.col(inputs, k), h, c);
    h = h2;
    c = c2;
    bstates[k] = h;
  }
  std::vector<Value> cols(T);
  for (int k = 0; k < T; ++k) cols[k] = t.concat_rows({fstates[k], bstates[k]});
  return t.concat_cols(cols);
}

Value Summarizer::embed_tokens(Tape& t, const std::vector<int>& ids) {
  return t.rows_as_cols(params_.at("embed.table"), ids);
}

Value Summarizer::encode_document(Tape& t, const std::vector<int>& token_ids) {
  if (token_ids.empty()) throw std::invalid_argument("encode_document: empty token list");
  return bilstm(t, enc_fwd_, enc_bwd_, embed_tokens(t, token_ids), cfg_.hidden_dim / 2);
}

Value Summarizer::encode_document_features(Tape& t, Value features) {
  if (t.cols(features) == 0) throw std::invalid_argument("encode_document: empty token list");
  if (t.rows(features) != cfg_.enc_in_dim())
    throw std::invalid_argument("encode_document: feature dimension mismatch");
  return bilstm(t, enc_fwd_, enc_bwd_, features, cfg_.hidden_dim / 2);
}

Value Summarizer::init_nodes(Tape& t, const kg::KnowledgeGraph& g, Value token_states) {
  int T = t.cols(token_states);
  int N = static_cast<int>(g.nodes.size());
  // Token-averaging selector: column i averages every token of every mention
  // of node i.
  Matrix sel = Matrix::Zero(T, N);
  std::vector<int> buckets(N);
  for (const auto& n : g.nodes) {
    int total = 0;
    for (const auto& m : n.mentions) total += m.end - m.start;
    if (total == 0) throw std::invalid_argument("init_nodes: node with no in-range mention");
    for (const auto& m : n.mentions) {
      if (m.end > T) throw std::invalid_argument("init_nodes: mention outside token range");
      for (int k = m.start; k < m.end; ++k) sel(k, n.node_id) += 1.0 / total;
    }
    int count = n.kind == kg::NodeKind::predicate ? 1 : n.mention_count();
    buckets[n.node_id] = std::min(count, cfg_.count_buckets) - 1;
  }
  Value mean = t.matmul(token_states, t.constant(sel));
  Value proj = t.matmul(t.param(params_.at("nodes.proj")), mean);
  Value counts = t.rows_as_cols(params_.at("nodes.count"), buckets);
  return t.add(proj, counts);
}

Summarizer::MaskedNodes Summarizer::apply_salience_mask(Tape& t, Value node_init) {
  MaskedNodes out;
  out.logits = t.matmul(t.param(params_.at("nodes.mask")), node_init);
  out.masks = t.sigmoid_(out.logits);
  out.masked = t.scale_cols(node_init, out.masks);
  return out;
}

Value Summarizer::graph_attention_stack(Tape& t, Value nodes, const kg::KnowledgeGraph& g) {
  if (g.empty()) throw std::invalid_argument("graph_attention_stack: empty graph");
  auto nbrs = g.neighborhoods();
  Value x = nodes;
  for (int l = 0; l < cfg_.num_layers; ++l) {
    std::vector<Value> heads;
    heads.reserve(cfg_.num_heads);
    for (int n = 0; n < cfg_.num_heads; ++n) {
      std::string p = "gat.l" + std::to_string(l) + ".h" + std::to_string(n);
      Value keys = t.matmul(t.param(params_.at(p + ".key")), x);     // per-node query (W1 v_i)
      Value queries = t.matmul(t.param(params_.at(p + ".query")), x);  // neighbor keys (W2 v_j)
      Value scores = t.matmul(t.transpose(keys), queries);           // (i, j)
      Value alpha = t.neighborhood_softmax(scores, nbrs);
      Value values = t.matmul(t.param(params_.at(p + ".value")), x);
      heads.push_back(t.matmul(values, t.transpose(alpha)));
    }
    x = t.add(x, t.concat_rows(heads));
  }
  return x;
}

Value Summarizer::subgraph_inits(Tape& t, const kg::SegGraphSet& seg, int subgraph,
                                 Value token_states, std::map<std::string, Value>& first_init) {
  const kg::KnowledgeGraph& g = seg.subgraphs[subgraph];
  Value raw = init_nodes(t, g, token_states);

  // Entities recurring across subgraphs reuse the initialization of their
  // first occurrence.
  std::map<int, std::string> key_of_node;
  for (const auto& [key, occs] : seg.entity_map)
    for (const auto& [p, id] : occs)
      if (p == subgraph) key_of_node[id] = key;

  std::vector<Value> cols(g.nodes.size());
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    auto kit = key_of_node.find(static_cast<int>(i));
    if (kit == key_of_node.end()) {
      cols[i] = t.col(raw, static_cast<int>(i));  // predicate node
      continue;
    }
    auto fit = first_init.find(kit->second);
    if (fit != first_init.end()) {
      cols[i] = fit->second;
    } else {
      cols[i] = t.col(raw, static_cast<int>(i));
      first_init.emplace(kit->second, cols[i]);
    }
  }
  return t.concat_cols(cols);
}

EncodedDocument Summarizer::encode(Tape& t, const DocumentInput& input) {
  EncodedDocument enc;
  enc.embed_matrix = t.param(params_.at("embed.table"));
  enc.token_states = encode_document(t, input.token_ids);
  enc.doc_keys = t.matmul(t.param(params_.at("attn.doc.token")), enc.token_states);
  enc.p_w5 = t.param(params_.at("attn.doc.state"));
  enc.p_u1 = t.param(params_.at("attn.doc.probe"));
  enc.p_out = t.param(params_.at("out.proj"));
  enc.p_copy = t.param(params_.at("copy.proj"));
  enc.p_dec_wx = t.param(*dec_.wx);
  enc.p_dec_wh = t.param(*dec_.wh);
  enc.p_dec_b = t.param(*dec_.b);

  if (!cfg_.has_graph_encoder()) return enc;

  enc.p_w7 = t.param(params_.at("attn.doc.graph"));

  if (cfg_.variant == Variant::docgraph) {
    if (!input.graph || input.graph->empty()) return enc;  // fully pruned: NoGraph path
    enc.has_graph = true;
    enc.num_nodes = static_cast<int>(input.graph->nodes.size());
    enc.node_init = init_nodes(t, *input.graph, enc.token_states);
    MaskedNodes m = apply_salience_mask(t, enc.node_init);
    enc.mask_logits = m.logits;
    enc.masks = m.masks;
    enc.node_states = graph_attention_stack(t, m.masked, *input.graph);
    enc.graph_keys = t.matmul(t.param(params_.at("attn.graph.node")), enc.node_states);
    enc.node_subgraph.assign(enc.num_nodes, 0);
    enc.p_w3 = t.param(params_.at("attn.graph.state"));
    enc.p_u0 = t.param(params_.at("attn.graph.probe"));
    return enc;
  }

  // SegGraph.
  const kg::SegGraphSet* seg = input.seg;
  if (!seg || seg->all_empty()) return enc;  // no entities anywhere: NoGraph path
  enc.has_graph = true;
  enc.num_subgraphs = static_cast<int>(seg->subgraphs.size());

  Value w4 = t.param(params_.at("attn.graph.node"));
  std::map<std::string, Value> first_init;
  std::vector<Value> pooled(seg->subgraphs.size());
  std::vector<Value> flat_states;
  std::vector<Value> flat_inits;
  std::vector<Value> flat_logits;
  Value seg_null = t.param(params_.at("seg.null"));

  for (size_t p = 0; p < seg->subgraphs.size(); ++p) {
    const auto& g = seg->subgraphs[p];
    if (g.empty()) {
      pooled[p] = seg_null;
      continue;
    }
    Value init = subgraph_inits(t, *seg, static_cast<int>(p), enc.token_states, first_init);
    MaskedNodes m = apply_salience_mask(t, init);
    Value states = graph_attention_stack(t, m.masked, g);
    pooled[p] = t.colwise_max(states);
    enc.sub_node_states.push_back(states);
    enc.sub_node_keys.push_back(t.matmul(w4, states));
    enc.sub_paragraph.push_back(static_cast<int>(p));
    flat_states.push_back(states);
    flat_inits.push_back(init);
    flat_logits.push_back(m.logits);
    for (size_t i = 0; i < g.nodes.size(); ++i) enc.node_subgraph.push_back(static_cast<int>(p));
  }
  enc.node_states = t.concat_cols(flat_states);
  enc.node_init = t.concat_cols(flat_inits);
  enc.mask_logits = t.concat_cols(flat_logits);
  enc.masks = t.sigmoid_(enc.mask_logits);
  enc.graph_keys = t.matmul(w4, enc.node_states);
  enc.num_nodes = static_cast<int>(enc.node_subgraph.size());

  enc.subgraph_states = bilstm(t, seg_fwd_, seg_bwd_, t.concat_cols(pooled), cfg_.hidden_dim / 2);
  enc.subgraph_keys = t.matmul(t.param(params_.at("attn.sub.graph")), enc.subgraph_states);
  enc.p_w3 = t.param(params_.at("attn.graph.state"));
  enc.p_u0 = t.param(params_.at("attn.graph.probe"));
  enc.p_sub_ws = t.param(params_.at("attn.sub.state"));
  enc.p_sub_u = t.param(params_.at("attn.sub.probe"));
  return enc;
}

DecoderState Summarizer::initial_state(Tape& t, const EncodedDocument& enc) {
  int T = t.cols(enc.token_states);
  Value mean = t.matmul(enc.token_states, t.constant(Matrix::Constant(T, 1, 1.0 / T)));
  DecoderState s;
  s.h = t.tanh_(t.matmul(t.param(params_.at("dec.bridge_h")), mean));
  s.c = t.tanh_(t.matmul(t.param(params_.at("dec.bridge_c")), mean));
  s.step = 0;
  return s;
}

std::pair<Value, Value> Summarizer::attend_graph(Tape& t, Value s, const EncodedDocument& enc) {
  Value scores = t.attention_scores(enc.graph_keys, t.matmul(enc.p_w3, s), enc.p_u0);
  Value attn = t.softmax(scores);
  Value ctx = t.matmul(enc.node_states, t.transpose(attn));
  return {ctx, attn};
}

Summarizer::HierarchicalAttention Summarizer::attend_graph_hierarchical(
    Tape& t, Value s, const EncodedDocument& enc) {
  HierarchicalAttention out;
  Value qsub = t.matmul(enc.p_sub_ws, s);
  out.subgraph_attention = t.softmax(t.attention_scores(enc.subgraph_keys, qsub, enc.p_sub_u));

  // Node attention normalized within each subgraph, then scaled by the
  // subgraph weight and renormalized over all nodes.
  Value qnode = t.matmul(enc.p_w3, s);
  std::vector<Value> parts;
  for (size_t k = 0; k < enc.sub_node_keys.size(); ++k) {
    Value local = t.softmax(t.attention_scores(enc.sub_node_keys[k], qnode, enc.p_u0));
    Value weight = t.pick(out.subgraph_attention, 0, enc.sub_paragraph[k]);
    parts.push_back(t.scalar_mul(local, weight));
  }
  Value combined = parts.size() == 1 ? parts[0] : t.concat_cols(parts);
  Value norm = t.reciprocal(t.sum(combined));
  out.node_attention = t.scalar_mul(combined, norm);
  out.context = t.matmul(enc.node_states, t.transpose(out.node_attention));
  return out;
}

std::pair<Value, Value> Summarizer::attend_document(Tape& t, Value s, const EncodedDocument& enc,
                                                    Value graph_context) {
  Value q = t.matmul(enc.p_w5, s);
  if (cfg_.has_graph_encoder()) q = t.add(q, t.matmul(enc.p_w7, graph_context));
  Value attn = t.softmax(t.attention_scores(enc.doc_keys, q, enc.p_u1));
  Value ctx = t.matmul(enc.token_states, t.transpose(attn));
  return {ctx, attn};
}

StepOutput Summarizer::step(Tape& t, int prev_vocab_id, const DecoderState& state,
                            const EncodedDocument& enc, const ExtendedVocab& ext) {
  if (prev_vocab_id < 0 || prev_vocab_id >= cfg_.vocab_size)
    throw std::invalid_argument("step: token id outside the generation vocabulary");
  StepOutput out;
  Value y_prev = t.rows_as_cols(params_.at("embed.table"), {prev_vocab_id});
  auto [h, c] = lstm_step(t, enc.p_dec_wx, enc.p_dec_wh, enc.p_dec_b, y_prev, state.h, state.c);
  out.state = DecoderState{h, c, state.step + 1};
  Value s = h;

  Value graph_ctx;
  if (enc.has_graph) {
    if (cfg_.variant == Variant::seggraph) {
      auto ha = attend_graph_hierarchical(t, s, enc);
      graph_ctx = ha.context;
      out.graph_attention = ha.node_attention;
      out.subgraph_attention = ha.subgraph_attention;
    } else {
      auto [ctx, attn] = attend_graph(t, s, enc);
      graph_ctx = ctx;
      out.graph_attention = attn;
    }
  } else if (cfg_.has_graph_encoder()) {
    graph_ctx = t.zeros(cfg_.node_dim(), 1);  // pruned-empty fallback
  }
  out.graph_context = graph_ctx;

  auto [doc_ctx, doc_attn] = attend_document(t, s, enc, graph_ctx);
  out.doc_context = doc_ctx;
  out.doc_attention = doc_attn;

  std::vector<Value> feat_parts{s, doc_ctx};
  if (cfg_.has_graph_encoder()) feat_parts.push_back(graph_ctx);
  Value feats = t.concat_rows(feat_parts);

  // Output projection tied to the input embedding table.
  Value logits = t.matmul(enc.embed_matrix, t.matmul(enc.p_out, feats));
  out.vocab_probs = t.softmax(logits);
  out.copy_prob = t.sigmoid_(t.matmul(enc.p_copy, t.concat_rows({feats, y_prev})));
  out.final_dist =
      t.copy_mix(out.vocab_probs, out.copy_prob, doc_attn, ext.src_ext_ids, ext.ext_size());
  return out;
}

Value Summarizer::sequence_loss(Tape& t, const EncodedDocument& enc, const DocumentInput& input) {
  if (input.target_ext_ids.empty()) throw std::invalid_argument("sequence_loss: empty target");
  DecoderState state = initial_state(t, enc);
  Value total;
  int steps = static_cast<int>(input.target_ext_ids.size());
  for (int k = 0; k < steps; ++k) {
    StepOutput so = step(t, input.decoder_in_ids[k], state, enc, input.ext);
    state = so.state;
    Value lp = t.log_(t.pick(so.final_dist, input.target_ext_ids[k], 0));
    total = k == 0 ? lp : t.add(total, lp);
  }
  return t.scale(total, -1.0 / steps);
}

Value Summarizer::mask_loss_sum(Tape& t, const EncodedDocument& enc,
                                const std::vector<int>& gold) {
  if (!enc.has_graph) throw std::invalid_argument("mask_loss_sum: document has no graph");
  Matrix targets(1, gold.size());
  for (size_t i = 0; i < gold.size(); ++i) targets(0, i) = gold[i];
  return t.bce_with_logits_sum(enc.mask_logits, targets);
}

int Summarizer::prev_as_vocab_id(int ext_id) const {
  return ext_id < cfg_.vocab_size ? ext_id : Vocabulary::kUnk;
}

Decoded Summarizer::decode_greedy(const DocumentInput& input, int max_len, int min_len) {
  Tape t;
  EncodedDocument enc = encode(t, input);
  DecoderState state = initial_state(t, enc);
  Decoded out;
  int prev = Vocabulary::kBos;
  for (int k = 0; k < max_len; ++k) {
    StepOutput so = step(t, prev, state, enc, input.ext);
    state = so.state;
    const Matrix& dist = t.val(so.final_dist);
    int best = -1;
    for (int i = 0; i < dist.rows(); ++i) {
      if (i == Vocabulary::kEos && k < min_len) continue;
      if (best < 0 || dist(i, 0) > dist(best, 0)) best = i;
    }
    out.logprobs.push_back(std::log(dist(best, 0)));
    out.sum_logprob += out.logprobs.back();
    if (best == Vocabulary::kEos) break;
    out.ext_ids.push_back(best);
    out.tokens.push_back(input.ext.surface(*input.vocab, best));
    prev = prev_as_vocab_id(best);
  }
  return out;
}

SampledRollout Summarizer::sample_on_tape(Tape& t, const DocumentInput& input, int max_len,
                                          std::mt19937_64& rng) {
  EncodedDocument enc = encode(t, input);
  DecoderState state = initial_state(t, enc);
  SampledRollout out;
  int prev = Vocabulary::kBos;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < max_len; ++k) {
    StepOutput so = step(t, prev, state, enc, input.ext);
    state = so.state;
    const Matrix& dist = t.val(so.final_dist);
    double u = unif(rng);
    double acc = 0.0;
    int chosen = static_cast<int>(dist.rows()) - 1;
    for (int i = 0; i < dist.rows(); ++i) {
      acc += dist(i, 0);
      if (u < acc) {
        chosen = i;
        break;
      }
    }
    out.step_logprobs.push_back(t.log_(t.pick(so.final_dist, chosen, 0)));
    if (chosen == Vocabulary::kEos) break;
    out.ext_ids.push_back(chosen);
    out.tokens.push_back(input.ext.surface(*input.vocab, chosen));
    prev = prev_as_vocab_id(chosen);
  }
  return out;
}

Decoded Summarizer::decode_sample(const DocumentInput& input, int max_len,
                                  std::mt19937_64& rng) {
  Tape t;
  SampledRollout roll = sample_on_tape(t, input, max_len, rng);
  Decoded out;
  out.ext_ids = roll.ext_ids;
  out.tokens = roll.tokens;
  for (Value lp : roll.step_logprobs) {
    out.logprobs.push_back(t.scalar(lp));
    out.sum_logprob += out.logprobs.back();
  }
  return out;
}

Decoded Summarizer::decode_beam(const DocumentInput& input, int max_len, int min_len,
                                int beam_width) {
  if (beam_width <= 1) return decode_greedy(input, max_len, min_len);
  Tape t;
  EncodedDocument enc = encode(t, input);

  struct Beam {
    DecoderState state;
    std::vector<int> ext_ids;
    double score = 0.0;
    bool done = false;
  };
  std::vector<Beam> beams{{initial_state(t, enc), {}, 0.0, false}};
  for (int k = 0; k < max_len; ++k) {
    std::vector<Beam> next;
    bool all_done = true;
    for (const Beam& b : beams) {
      if (b.done) {
        next.push_back(b);
        continue;
      }
      all_done = false;
      int prev = b.ext_ids.empty() ? Vocabulary::kBos : prev_as_vocab_id(b.ext_ids.back());
      StepOutput so = step(t, prev, b.state, enc, input.ext);
      const Matrix& dist = t.val(so.final_dist);
      // Best beam_width continuations of this hypothesis.
      std::vector<int> order(dist.rows());
      for (int i = 0; i < dist.rows(); ++i) order[i] = i;
      std::partial_sort(order.begin(), order.begin() + std::min<int>(beam_width + 1, order.size()),
                        order.end(),
                        [&](int x, int y) { return dist(x, 0) > dist(y, 0); });
      int taken = 0;
      for (int i : order) {
        if (taken >= beam_width) break;
        if (i == Vocabulary::kEos && k < min_len) continue;
        Beam nb = b;
        nb.state = so.state;
        nb.score += std::log(dist(i, 0));
        if (i == Vocabulary::kEos)
          nb.done = true;
        else
          nb.ext_ids.push_back(i);
        next.push_back(std::move(nb));
        ++taken;
      }
    }
    if (all_done) break;
    std::stable_sort(next.begin(), next.end(),
                     [](const Beam& a, const Beam& b) { return a.score > b.score; });
    if (static_cast<int>(next.size()) > beam_width) next.resize(beam_width);
    beams = std::move(next);
  }
  const Beam* best = nullptr;
  for (const Beam& b : beams)
    if (b.done && (!best || b.score > best->score)) best = &b;
  if (!best) best = &beams.front();
  Decoded out;
  out.ext_ids = best->ext_ids;
  for (int id : out.ext_ids) out.tokens.push_back(input.ext.surface(*input.vocab, id));
  out.sum_logprob = best->score;
  return out;
}

DocumentInput prepare_input(const Vocabulary& vocab, const AnnotatedDocument& doc,
                            const kg::KnowledgeGraph* graph, const kg::SegGraphSet* seg,
                            const StopwordSet& stopwords) {
  DocumentInput in;
  in.doc_id = doc.doc_id;
  in.vocab = &vocab;
  in.tokens = doc.tokens;
  in.token_ids = vocab.ids(doc.tokens);
  in.ext = ExtendedVocab::build(vocab, doc.tokens);
  in.reference_tokens = doc.reference_tokens;

  in.decoder_in_ids.push_back(Vocabulary::kBos);
  for (const auto& tok : doc.reference_tokens) {
    in.target_ext_ids.push_back(in.ext.target_id(vocab, tok));
    in.decoder_in_ids.push_back(vocab.id(tok));
  }
  in.target_ext_ids.push_back(Vocabulary::kEos);

  in.graph = graph;
  in.seg = seg;
  if (graph) {
    in.salience = kg::label_node_salience(*graph, doc.reference_tokens, stopwords);
  } else if (seg) {
    for (const auto& g : seg->subgraphs) {
      if (g.empty()) continue;
      auto labels = kg::label_node_salience(g, doc.reference_tokens, stopwords);
      in.salience.insert(in.salience.end(), labels.begin(), labels.end());
    }
  }
  return in;
}

}  // namespace kgsum::model
