#pragma once

#include <random>
#include <string>
#include <vector>

#include "kgsum/graph.hpp"
#include "kgsum/nn/tape.hpp"
#include "kgsum/vocab.hpp"

namespace kgsum::model {

enum class Variant { nograph, docgraph, seggraph };

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);

struct ModelConfig {
  Variant variant = Variant::docgraph;
  int vocab_size = 0;
  int embed_dim = 128;
  int hidden_dim = 256;  // BiLSTM output (split across directions) and decoder state
  int num_heads = 4;
  int head_dim = 72;
  int num_layers = 2;
  int attn_dim = 128;  // additive-attention inner dimension
  int count_buckets = 10;
  // Input dimension of the document encoder; 0 means embed_dim (the internal
  // lookup table). Set this when plugging an external embedding provider.
  int encoder_input_dim = 0;

  int node_dim() const { return num_heads * head_dim; }
  int enc_in_dim() const { return encoder_input_dim > 0 ? encoder_input_dim : embed_dim; }
  bool has_graph_encoder() const { return variant != Variant::nograph; }
  void validate() const;
};

// Source of per-token feature vectors for the document encoder. The default
// path is the model's own trainable lookup table; fixed providers
// (precomputed contextual embeddings) plug in through this interface and
// are treated as constants.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  // Returns dim() x tokens.size(), one column per token.
  virtual nn::Matrix embed(const std::vector<std::string>& tokens) const = 0;
};

// Deterministic stand-in for a pretrained contextual encoder: each surface
// form hashes to a fixed pseudo-random vector. Useful for plugging the
// provider path without shipping model weights.
class HashedEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashedEmbeddingProvider(int dim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
  int dim() const override { return dim_; }
  nn::Matrix embed(const std::vector<std::string>& tokens) const override;

 private:
  int dim_;
  std::uint64_t seed_;
};

// A model-ready view of one document: vocabulary ids, copy bookkeeping,
// teacher-forcing targets, and the graph built for the active variant.
struct DocumentInput {
  std::string doc_id;
  const Vocabulary* vocab = nullptr;
  std::vector<std::string> tokens;
  std::vector<int> token_ids;
  ExtendedVocab ext;
  std::vector<std::string> reference_tokens;
  std::vector<int> target_ext_ids;  // reference as extended ids, plus </s>
  std::vector<int> decoder_in_ids;  // <s>, then reference as generation-vocab ids
  const kg::KnowledgeGraph* graph = nullptr;
  const kg::SegGraphSet* seg = nullptr;
  std::vector<int> salience;  // gold labels, flattened in node order
};

DocumentInput prepare_input(const Vocabulary& vocab, const AnnotatedDocument& doc,
                            const kg::KnowledgeGraph* graph, const kg::SegGraphSet* seg,
                            const StopwordSet& stopwords);

// Tape-bound encoder outputs plus cached projections reused across decoder
// steps.
struct EncodedDocument {
  nn::Value token_states;  // hidden_dim x T
  nn::Value doc_keys;      // attn_dim x T
  bool has_graph = false;
  nn::Value node_states;  // node_dim x N, flattened across subgraphs
  nn::Value node_init;    // node_dim x N, pre-mask
  nn::Value mask_logits;  // 1 x N
  nn::Value masks;        // 1 x N
  nn::Value graph_keys;   // attn_dim x N
  int num_nodes = 0;
  // SegGraph only.
  std::vector<int> node_subgraph;          // flattened node -> paragraph index
  std::vector<nn::Value> sub_node_keys;    // per non-empty subgraph
  std::vector<nn::Value> sub_node_states;  // per non-empty subgraph
  std::vector<int> sub_paragraph;          // paragraph index per entry above
  nn::Value subgraph_states;               // hidden_dim x P
  nn::Value subgraph_keys;                 // attn_dim x P
  int num_subgraphs = 0;
  // Parameter nodes cached once per tape and reused across decoder steps.
  nn::Value embed_matrix;  // vocab x embed
  nn::Value p_w3, p_u0;    // graph attention
  nn::Value p_w5, p_w7, p_u1;  // document attention
  nn::Value p_sub_ws, p_sub_u;  // subgraph attention
  nn::Value p_out, p_copy;
  nn::Value p_dec_wx, p_dec_wh, p_dec_b;
};

struct DecoderState {
  nn::Value h;
  nn::Value c;
  int step = 0;
};

struct StepOutput {
  DecoderState state;
  nn::Value vocab_probs;        // V x 1
  nn::Value copy_prob;          // 1 x 1
  nn::Value doc_attention;      // 1 x T
  nn::Value graph_attention;    // 1 x N (invalid when no graph)
  nn::Value subgraph_attention; // 1 x P (seggraph only)
  nn::Value graph_context;      // node_dim x 1 (zeros when no graph)
  nn::Value doc_context;        // hidden_dim x 1
  nn::Value final_dist;         // ext_size x 1
};

struct Decoded {
  std::vector<int> ext_ids;  // without </s>
  std::vector<std::string> tokens;
  std::vector<double> logprobs;  // per emitted step, including </s> if emitted
  double sum_logprob = 0.0;
};

struct SampledRollout {
  std::vector<int> ext_ids;
  std::vector<std::string> tokens;
  std::vector<nn::Value> step_logprobs;  // on the caller's tape
};

class Summarizer {
 public:
  Summarizer(ModelConfig cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  // --- document side ---
  nn::Value embed_tokens(nn::Tape& t, const std::vector<int>& ids);
  // BiLSTM over the internal lookup table.
  nn::Value encode_document(nn::Tape& t, const std::vector<int>& token_ids);
  // BiLSTM over externally provided token features (one column per token).
  nn::Value encode_document_features(nn::Tape& t, nn::Value features);

  // --- graph side ---
  nn::Value init_nodes(nn::Tape& t, const kg::KnowledgeGraph& g, nn::Value token_states);
  struct MaskedNodes {
    nn::Value masked;
    nn::Value logits;
    nn::Value masks;
  };
  MaskedNodes apply_salience_mask(nn::Tape& t, nn::Value node_init);
  nn::Value graph_attention_stack(nn::Tape& t, nn::Value nodes, const kg::KnowledgeGraph& g);

  EncodedDocument encode(nn::Tape& t, const DocumentInput& input);

  // --- decoder ---
  DecoderState initial_state(nn::Tape& t, const EncodedDocument& enc);
  std::pair<nn::Value, nn::Value> attend_graph(nn::Tape& t, nn::Value s,
                                               const EncodedDocument& enc);
  struct HierarchicalAttention {
    nn::Value context;
    nn::Value node_attention;      // renormalized, 1 x N
    nn::Value subgraph_attention;  // 1 x P
  };
  HierarchicalAttention attend_graph_hierarchical(nn::Tape& t, nn::Value s,
                                                  const EncodedDocument& enc);
  std::pair<nn::Value, nn::Value> attend_document(nn::Tape& t, nn::Value s,
                                                  const EncodedDocument& enc,
                                                  nn::Value graph_context);
  StepOutput step(nn::Tape& t, int prev_vocab_id, const DecoderState& state,
                  const EncodedDocument& enc, const ExtendedVocab& ext);

  // --- losses (tape-bound) ---
  nn::Value sequence_loss(nn::Tape& t, const EncodedDocument& enc, const DocumentInput& input);
  nn::Value mask_loss_sum(nn::Tape& t, const EncodedDocument& enc, const std::vector<int>& gold);

  // --- decoding ---
  Decoded decode_greedy(const DocumentInput& input, int max_len, int min_len);
  Decoded decode_sample(const DocumentInput& input, int max_len, std::mt19937_64& rng);
  SampledRollout sample_on_tape(nn::Tape& t, const DocumentInput& input, int max_len,
                                std::mt19937_64& rng);
  Decoded decode_beam(const DocumentInput& input, int max_len, int min_len, int beam_width);

 private:
  ModelConfig cfg_;
  nn::ParameterSet params_;

  struct Lstm {
    nn::Parameter* wx;
    nn::Parameter* wh;
    nn::Parameter* b;
  };
  Lstm make_lstm(const std::string& prefix, int in_dim, int hidden);
  static std::pair<nn::Value, nn::Value> lstm_step(nn::Tape& t, nn::Value wx, nn::Value wh,
                                                   nn::Value b, nn::Value x, nn::Value h,
                                                   nn::Value c);
  nn::Value bilstm(nn::Tape& t, const Lstm& fwd, const Lstm& bwd, nn::Value inputs, int hidden);

  Lstm enc_fwd_, enc_bwd_, dec_, seg_fwd_, seg_bwd_;
  int prev_as_vocab_id(int ext_id) const;
  nn::Value subgraph_inits(nn::Tape& t, const kg::SegGraphSet& seg, int subgraph,
                           nn::Value token_states,
                           std::map<std::string, nn::Value>& first_init);
};

}  // namespace kgsum::model
