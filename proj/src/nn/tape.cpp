#include "kgsum/nn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace kgsum::nn {

void glorot_fill(Matrix& m, std::mt19937_64& rng) {
  double r = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-r, r);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

Parameter& ParameterSet::create(const std::string& name, int rows, int cols) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter: " + name);
  params_.push_back(std::make_unique<Parameter>(name, rows, cols));
  index_.emplace(name, static_cast<int>(params_.size()) - 1);
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterSet::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterSet::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw std::logic_error("unknown parameter: " + name);
  return *p;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterSet::init_uniform(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params_) glorot_fill(p->value, rng);
}

void ParameterSet::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

Value Tape::push(Matrix v, bool req, std::function<void(Tape&)> back) {
  Node n;
  n.val = std::move(v);
  n.req = req;
  if (req) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

void Tape::ensure_grad(int idx) {
  Node& n = nodes_[idx];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.val.rows(), n.val.cols());
}

Value Tape::constant(Matrix m) { return push(std::move(m), false, nullptr); }

Value Tape::zeros(int rows, int cols) { return constant(Matrix::Zero(rows, cols)); }

Value Tape::param(Parameter& p) {
  Parameter* pp = &p;
  Value out{static_cast<int>(nodes_.size())};
  push(p.value, true, [out, pp](Tape& t) { pp->grad += t.nodes_[out.idx].grad; });
  return out;
}

Value Tape::rows_as_cols(Parameter& table, const std::vector<int>& ids) {
  Matrix m(table.value.cols(), ids.size());
  for (size_t k = 0; k < ids.size(); ++k) m.col(k) = table.value.row(ids[k]).transpose();
  Parameter* pp = &table;
  std::vector<int> idv = ids;
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(m), true, [out, pp, idv](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;
    for (size_t k = 0; k < idv.size(); ++k) pp->grad.row(idv[k]) += g.col(k).transpose();
  });
  return out;
}

Value Tape::add(Value a, Value b) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val + nodes_[b.idx].val, req(a) || req(b), [out, a, b](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;
    if (t.req(a)) { t.ensure_grad(a.idx); t.grad(a) += g; }
    if (t.req(b)) { t.ensure_grad(b.idx); t.grad(b) += g; }
  });
  return out;
}

Value Tape::sub(Value a, Value b) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val - nodes_[b.idx].val, req(a) || req(b), [out, a, b](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;
    if (t.req(a)) { t.ensure_grad(a.idx); t.grad(a) += g; }
    if (t.req(b)) { t.ensure_grad(b.idx); t.grad(b) -= g; }
  });
  return out;
}

Value Tape::matmul(Value a, Value b) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val * nodes_[b.idx].val, req(a) || req(b), [out, a, b](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;
    if (t.req(a)) {
      t.ensure_grad(a.idx);
      t.grad(a).noalias() += g * t.nodes_[b.idx].val.transpose();
    }
    if (t.req(b)) {
      t.ensure_grad(b.idx);
      t.grad(b).noalias() += t.nodes_[a.idx].val.transpose() * g;
    }
  });
  return out;
}

Value Tape::cmul(Value a, Value b) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val.cwiseProduct(nodes_[b.idx].val), req(a) || req(b),
             [out, a, b](Tape& t) {
               const Matrix& g = t.nodes_[out.idx].grad;
               if (t.req(a)) {
                 t.ensure_grad(a.idx);
                 t.grad(a) += g.cwiseProduct(t.nodes_[b.idx].val);
               }
               if (t.req(b)) {
                 t.ensure_grad(b.idx);
                 t.grad(b) += g.cwiseProduct(t.nodes_[a.idx].val);
               }
             });
  return out;
}

Value Tape::scale(Value a, double c) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val * c, req(a), [out, a, c](Tape& t) {
    if (t.req(a)) { t.ensure_grad(a.idx); t.grad(a) += t.nodes_[out.idx].grad * c; }
  });
  return out;
}

Value Tape::scalar_mul(Value a, Value s) {
  double sv = nodes_[s.idx].val(0, 0);
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val * sv, req(a) || req(s), [out, a, s, sv](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;
    if (t.req(a)) { t.ensure_grad(a.idx); t.grad(a) += g * sv; }
    if (t.req(s)) {
      t.ensure_grad(s.idx);
      t.grad(s)(0, 0) += g.cwiseProduct(t.nodes_[a.idx].val).sum();
    }
  });
  return out;
}

Value Tape::tanh_(Value a) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val.array().tanh().matrix(), req(a), [out, a](Tape& t) {
    if (!t.req(a)) return;
    t.ensure_grad(a.idx);
    const Matrix& y = t.nodes_[out.idx].val;
    t.grad(a) += t.nodes_[out.idx].grad.cwiseProduct((1.0 - y.array().square()).matrix());
  });
  return out;
}

Value Tape::sigmoid_(Value a) {
  Matrix y = (1.0 / (1.0 + (-nodes_[a.idx].val.array()).exp())).matrix();
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(y), req(a), [out, a](Tape& t) {
    if (!t.req(a)) return;
    t.ensure_grad(a.idx);
    const Matrix& s = t.nodes_[out.idx].val;
    t.grad(a) += t.nodes_[out.idx].grad.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  });
  return out;
}

Value Tape::log_(Value a) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val.array().log().matrix(), req(a), [out, a](Tape& t) {
    if (!t.req(a)) return;
    t.ensure_grad(a.idx);
    t.grad(a) += t.nodes_[out.idx].grad.cwiseQuotient(t.nodes_[a.idx].val);
  });
  return out;
}

Value Tape::reciprocal(Value a) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val.cwiseInverse(), req(a), [out, a](Tape& t) {
    if (!t.req(a)) return;
    t.ensure_grad(a.idx);
    const Matrix& y = t.nodes_[out.idx].val;
    t.grad(a) -= t.nodes_[out.idx].grad.cwiseProduct(y.cwiseProduct(y));
  });
  return out;
}

Value Tape::transpose(Value a) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val.transpose(), req(a), [out, a](Tape& t) {
    if (t.req(a)) { t.ensure_grad(a.idx); t.grad(a) += t.nodes_[out.idx].grad.transpose(); }
  });
  return out;
}

Value Tape::concat_rows(const std::vector<Value>& parts) {
  int total = 0, cols = static_cast<int>(nodes_[parts[0].idx].val.cols());
  bool r = false;
  for (Value p : parts) {
    total += static_cast<int>(nodes_[p.idx].val.rows());
    r = r || req(p);
  }
  Matrix m(total, cols);
  int at = 0;
  for (Value p : parts) {
    int pr = static_cast<int>(nodes_[p.idx].val.rows());
    m.middleRows(at, pr) = nodes_[p.idx].val;
    at += pr;
  }
  std::vector<Value> pv = parts;
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(m), r, [out, pv](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;
    int at = 0;
    for (Value p : pv) {
      int pr = static_cast<int>(t.nodes_[p.idx].val.rows());
      if (t.req(p)) {
        t.ensure_grad(p.idx);
        t.grad(p) += g.middleRows(at, pr);
      }
      at += pr;
    }
  });
  return out;
}

Value Tape::concat_cols(const std::vector<Value>& parts) {
  int total = 0, rows = static_cast<int>(nodes_[parts[0].idx].val.rows());
  bool r = false;
  for (Value p : parts) {
    total += static_cast<int>(nodes_[p.idx].val.cols());
    r = r || req(p);
  }
  Matrix m(rows, total);
  int at = 0;
  for (Value p : parts) {
    int pc = static_cast<int>(nodes_[p.idx].val.cols());
    m.middleCols(at, pc) = nodes_[p.idx].val;
    at += pc;
  }
  std::vector<Value> pv = parts;
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(m), r, [out, pv](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;
    int at = 0;
    for (Value p : pv) {
      int pc = static_cast<int>(t.nodes_[p.idx].val.cols());
      if (t.req(p)) {
        t.ensure_grad(p.idx);
        t.grad(p) += g.middleCols(at, pc);
      }
      at += pc;
    }
  });
  return out;
}

Value Tape::rows_range(Value a, int begin, int end) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val.middleRows(begin, end - begin), req(a),
             [out, a, begin, end](Tape& t) {
               if (!t.req(a)) return;
               t.ensure_grad(a.idx);
               t.grad(a).middleRows(begin, end - begin) += t.nodes_[out.idx].grad;
             });
  return out;
}

Value Tape::col(Value a, int j) {
  Value out{static_cast<int>(nodes_.size())};
  push(nodes_[a.idx].val.col(j), req(a), [out, a, j](Tape& t) {
    if (!t.req(a)) return;
    t.ensure_grad(a.idx);
    t.grad(a).col(j) += t.nodes_[out.idx].grad;
  });
  return out;
}

Value Tape::pick(Value a, int r, int c) {
  Matrix m(1, 1);
  m(0, 0) = nodes_[a.idx].val(r, c);
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(m), req(a), [out, a, r, c](Tape& t) {
    if (!t.req(a)) return;
    t.ensure_grad(a.idx);
    t.grad(a)(r, c) += t.nodes_[out.idx].grad(0, 0);
  });
  return out;
}

Value Tape::sum(Value a) {
  Matrix m(1, 1);
  m(0, 0) = nodes_[a.idx].val.sum();
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(m), req(a), [out, a](Tape& t) {
    if (!t.req(a)) return;
    t.ensure_grad(a.idx);
    t.grad(a).array() += t.nodes_[out.idx].grad(0, 0);
  });
  return out;
}

Value Tape::mean(Value a) {
  double n = static_cast<double>(nodes_[a.idx].val.size());
  return scale(sum(a), 1.0 / n);
}

Value Tape::softmax(Value a) {
  const Matrix& x = nodes_[a.idx].val;
  if (x.rows() != 1 && x.cols() != 1)
    throw std::logic_error("softmax expects a row or column vector");
  Eigen::ArrayXXd shifted = x.array() - x.maxCoeff();
  Eigen::ArrayXXd e = shifted.exp();
  Matrix y = (e / e.sum()).matrix();
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(y), req(a), [out, a](Tape& t) {
    if (!t.req(a)) return;
    t.ensure_grad(a.idx);
    const Matrix& y2 = t.nodes_[out.idx].val;
    const Matrix& g = t.nodes_[out.idx].grad;
    double dot = g.cwiseProduct(y2).sum();
    t.grad(a) += y2.cwiseProduct((g.array() - dot).matrix());
  });
  return out;
}

Value Tape::neighborhood_softmax(Value scores, const std::vector<std::vector<int>>& nbrs) {
  const Matrix& s = nodes_[scores.idx].val;
  Matrix y = Matrix::Zero(s.rows(), s.cols());
  for (size_t i = 0; i < nbrs.size(); ++i) {
    if (nbrs[i].empty()) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j : nbrs[i]) mx = std::max(mx, s(i, j));
    double z = 0.0;
    for (int j : nbrs[i]) z += std::exp(s(i, j) - mx);
    for (int j : nbrs[i]) y(i, j) = std::exp(s(i, j) - mx) / z;
  }
  auto nb = nbrs;
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(y), req(scores), [out, scores, nb](Tape& t) {
    if (!t.req(scores)) return;
    t.ensure_grad(scores.idx);
    const Matrix& y2 = t.nodes_[out.idx].val;
    const Matrix& g = t.nodes_[out.idx].grad;
    Matrix& gs = t.grad(scores);
    for (size_t i = 0; i < nb.size(); ++i) {
      if (nb[i].empty()) continue;
      double dot = 0.0;
      for (int j : nb[i]) dot += g(i, j) * y2(i, j);
      for (int j : nb[i]) gs(i, j) += y2(i, j) * (g(i, j) - dot);
    }
  });
  return out;
}

Value Tape::attention_scores(Value keys, Value query, Value probe) {
  const Matrix& k = nodes_[keys.idx].val;
  const Matrix& q = nodes_[query.idx].val;
  const Matrix& u = nodes_[probe.idx].val;
  Matrix z = (k.colwise() + Eigen::VectorXd(q.col(0))).array().tanh().matrix();
  Matrix s = u.transpose() * z;  // 1 x T
  // z is stashed by value for the backward pass.
  auto zz = std::make_shared<Matrix>(std::move(z));
  bool r = req(keys) || req(query) || req(probe);
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(s), r, [out, keys, query, probe, zz](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;  // 1 x T
    const Matrix& u2 = t.nodes_[probe.idx].val;
    Matrix dz = u2 * g;  // a x T
    Matrix dpre = dz.cwiseProduct((1.0 - zz->array().square()).matrix());
    if (t.req(keys)) { t.ensure_grad(keys.idx); t.grad(keys) += dpre; }
    if (t.req(query)) {
      t.ensure_grad(query.idx);
      t.grad(query) += dpre.rowwise().sum();
    }
    if (t.req(probe)) {
      t.ensure_grad(probe.idx);
      t.grad(probe).noalias() += *zz * g.transpose();
    }
  });
  return out;
}

Value Tape::scale_cols(Value m, Value s) {
  const Matrix& mv = nodes_[m.idx].val;
  const Matrix& sv = nodes_[s.idx].val;
  Matrix y = mv.array().rowwise() * sv.row(0).array();
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(y), req(m) || req(s), [out, m, s](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;
    const Matrix& mv2 = t.nodes_[m.idx].val;
    const Matrix& sv2 = t.nodes_[s.idx].val;
    if (t.req(m)) {
      t.ensure_grad(m.idx);
      t.grad(m) += (g.array().rowwise() * sv2.row(0).array()).matrix();
    }
    if (t.req(s)) {
      t.ensure_grad(s.idx);
      t.grad(s) += g.cwiseProduct(mv2).colwise().sum();
    }
  });
  return out;
}

Value Tape::colwise_max(Value a) {
  const Matrix& x = nodes_[a.idx].val;
  Matrix y(x.rows(), 1);
  std::vector<int> arg(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < x.cols(); ++j)
      if (x(i, j) > x(i, best)) best = static_cast<int>(j);
    arg[i] = best;
    y(i, 0) = x(i, best);
  }
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(y), req(a), [out, a, arg](Tape& t) {
    if (!t.req(a)) return;
    t.ensure_grad(a.idx);
    const Matrix& g = t.nodes_[out.idx].grad;
    for (size_t i = 0; i < arg.size(); ++i) t.grad(a)(i, arg[i]) += g(i, 0);
  });
  return out;
}

Value Tape::bce_with_logits_sum(Value logits, Matrix targets) {
  const Matrix& z = nodes_[logits.idx].val;
  double loss = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    double zz = z(j), tt = targets(j);
    loss += std::max(zz, 0.0) - zz * tt + std::log1p(std::exp(-std::abs(zz)));
  }
  Matrix m(1, 1);
  m(0, 0) = loss;
  auto tg = std::make_shared<Matrix>(std::move(targets));
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(m), req(logits), [out, logits, tg](Tape& t) {
    if (!t.req(logits)) return;
    t.ensure_grad(logits.idx);
    double g = t.nodes_[out.idx].grad(0, 0);
    const Matrix& z2 = t.nodes_[logits.idx].val;
    Matrix sig = (1.0 / (1.0 + (-z2.array()).exp())).matrix();
    t.grad(logits) += g * (sig - *tg);
  });
  return out;
}

Value Tape::copy_mix(Value vocab_probs, Value copy_prob, Value attn,
                     const std::vector<int>& ext_ids, int ext_size) {
  const Matrix& pv = nodes_[vocab_probs.idx].val;  // V x 1
  double pc = nodes_[copy_prob.idx].val(0, 0);
  const Matrix& a = nodes_[attn.idx].val;  // 1 x T
  int vsize = static_cast<int>(pv.rows());
  if (ext_size < vsize) throw std::logic_error("copy_mix: ext_size smaller than vocabulary");

  Matrix out_m = Matrix::Zero(ext_size, 1);
  out_m.topRows(vsize) = (1.0 - pc) * pv;
  for (size_t k = 0; k < ext_ids.size(); ++k) out_m(ext_ids[k], 0) += pc * a(0, k);

  std::vector<int> ids = ext_ids;
  bool r = req(vocab_probs) || req(copy_prob) || req(attn);
  Value out{static_cast<int>(nodes_.size())};
  push(std::move(out_m), r, [out, vocab_probs, copy_prob, attn, ids, vsize](Tape& t) {
    const Matrix& g = t.nodes_[out.idx].grad;
    const Matrix& pv2 = t.nodes_[vocab_probs.idx].val;
    const Matrix& a2 = t.nodes_[attn.idx].val;
    double pc2 = t.nodes_[copy_prob.idx].val(0, 0);
    if (t.req(vocab_probs)) {
      t.ensure_grad(vocab_probs.idx);
      t.grad(vocab_probs) += (1.0 - pc2) * g.topRows(vsize);
    }
    if (t.req(attn)) {
      t.ensure_grad(attn.idx);
      Matrix& ga = t.grad(attn);
      for (size_t k = 0; k < ids.size(); ++k) ga(0, k) += pc2 * g(ids[k], 0);
    }
    if (t.req(copy_prob)) {
      t.ensure_grad(copy_prob.idx);
      double d = -g.topRows(vsize).cwiseProduct(pv2).sum();
      for (size_t k = 0; k < ids.size(); ++k) d += g(ids[k], 0) * a2(0, k);
      t.grad(copy_prob)(0, 0) += d;
    }
  });
  return out;
}

void Tape::backward(Value loss) {
  if (nodes_[loss.idx].val.size() != 1) throw std::logic_error("backward expects a 1x1 loss");
  ensure_grad(loss.idx);
  nodes_[loss.idx].grad(0, 0) += 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() != 0) n.back(*this);
  }
}

}  // namespace kgsum::nn
