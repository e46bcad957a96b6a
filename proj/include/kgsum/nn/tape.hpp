#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace kgsum::nn {

using Matrix = Eigen::MatrixXd;

// A named trainable tensor. Gradients accumulate across Tape::backward calls
// until zero_grad; the adam_* buffers belong to the optimizer.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m, adam_v;

  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

// Owning registry; iteration follows registration order so initialization
// and checkpoints are deterministic.
class ParameterSet {
 public:
  Parameter& create(const std::string& name, int rows, int cols);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  size_t size() const { return params_.size(); }

  // Glorot-style uniform init over all parameters, in registration order.
  void init_uniform(std::uint64_t seed);
  void zero_grads();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, int> index_;
};

struct Value {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Eager reverse-mode tape over Eigen matrices. Column vectors are d x 1;
// token/node sequences are d x T with one column per position. One tape per
// forward pass; backward() walks the recorded ops in reverse.
class Tape {
 public:
  Value constant(Matrix m);
  Value zeros(int rows, int cols);
  Value param(Parameter& p);
  // Gathers rows `ids` of an (n x d) table as the columns of a (d x k)
  // matrix. Backward scatter-adds into the table rows.
  Value rows_as_cols(Parameter& table, const std::vector<int>& ids);

  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value matmul(Value a, Value b);
  Value cmul(Value a, Value b);   // elementwise; shapes must match
  Value scale(Value a, double c);
  Value scalar_mul(Value a, Value s);  // s is 1x1
  Value tanh_(Value a);
  Value sigmoid_(Value a);
  Value log_(Value a);
  Value reciprocal(Value a);  // elementwise 1/x
  Value transpose(Value a);
  Value concat_rows(const std::vector<Value>& parts);
  Value concat_cols(const std::vector<Value>& parts);
  Value rows_range(Value a, int begin, int end);
  Value col(Value a, int j);
  Value pick(Value a, int r, int c);  // 1x1 view of one entry
  Value sum(Value a);                 // 1x1
  Value mean(Value a);                // 1x1

  // Softmax over all entries of a row or column vector.
  Value softmax(Value a);
  // Row-restricted softmax of a square score matrix: row i is a distribution
  // over the columns listed in nbrs[i]; other entries are zero.
  Value neighborhood_softmax(Value scores, const std::vector<std::vector<int>>& nbrs);
  // Additive attention scores: probe^T tanh(keys + query broadcast over
  // columns). keys: a x T, query: a x 1, probe: a x 1 -> 1 x T.
  Value attention_scores(Value keys, Value query, Value probe);
  // Scales column j of m by s(0, j). m: d x n, s: 1 x n.
  Value scale_cols(Value m, Value s);
  // Elementwise max over columns: d x n -> d x 1. Ties route the gradient to
  // the first maximizing column.
  Value colwise_max(Value a);
  // Sum of binary cross-entropies between sigmoid(logits) and targets,
  // computed in the numerically stable logits form. logits: 1 x n.
  Value bce_with_logits_sum(Value logits, Matrix targets);
  // Pointer-generator mixture over the extended vocabulary:
  //   out[w]          = (1 - copy_prob) * vocab_probs[w]        for w < V
  //   out[ext_ids[k]] += copy_prob * attn[k]                    for all k
  // vocab_probs: V x 1, copy_prob: 1x1, attn: 1 x T -> ext_size x 1.
  Value copy_mix(Value vocab_probs, Value copy_prob, Value attn,
                 const std::vector<int>& ext_ids, int ext_size);

  const Matrix& val(Value v) const { return nodes_[v.idx].val; }
  int rows(Value v) const { return static_cast<int>(nodes_[v.idx].val.rows()); }
  int cols(Value v) const { return static_cast<int>(nodes_[v.idx].val.cols()); }
  double scalar(Value v) const { return nodes_[v.idx].val(0, 0); }

  // Seeds d(loss)/d(loss) = 1 and accumulates into Parameter::grad. loss
  // must be 1x1.
  void backward(Value loss);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    std::function<void(Tape&)> back;
    bool req = false;  // depends on a parameter
  };

  std::vector<Node> nodes_;

  Value push(Matrix v, bool req, std::function<void(Tape&)> back);
  bool req(Value v) const { return nodes_[v.idx].req; }
  Matrix& grad(Value v) { return nodes_[v.idx].grad; }
  void ensure_grad(int idx);
};

// Deterministic Glorot-uniform fill.
void glorot_fill(Matrix& m, std::mt19937_64& rng);

}  // namespace kgsum::nn
