#include "kgsum/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "kgsum/checkpoint.hpp"
#include "kgsum/rouge.hpp"

namespace kgsum::train {

namespace fs = std::filesystem;

void TrainingConfig::validate() const {
  if (lr_ml <= 0 || lr_rl <= 0 || grad_clip <= 0 || batch_size <= 0)
    throw std::invalid_argument("training config values must be positive");
  if (max_len <= 0 || min_len < 0) throw std::invalid_argument("invalid decode lengths");
}

void RewardConfig::validate() const {
  if (gamma1 < 0 || gamma2 < 0 || gamma_cloze < 0 || gamma1 + gamma2 > 1.0)
    throw std::invalid_argument(
        "reward config: need gamma1, gamma2, gamma_cloze >= 0 and gamma1 + gamma2 <= 1");
}

std::string log_row_tsv(const LogRow& row) {
  std::ostringstream os;
  os << row.stage << "\t" << row.epoch << "\t" << row.step << "\t" << row.loss_seq << "\t"
     << row.loss_mask << "\t" << row.mean_reward;
  return os.str();
}

double self_critical_loss(double reward_sample, double reward_greedy, double sum_logprob) {
  return -(reward_sample - reward_greedy) * sum_logprob;
}

RewardFn make_composite_reward(const RewardConfig& cfg,
                               const std::map<std::string, std::vector<cloze::ClozeQuestion>>* banks,
                               const cloze::QaScorer* qa, std::vector<std::string>* warnings) {
  cfg.validate();
  auto warned = std::make_shared<std::set<std::string>>();
  return [cfg, banks, qa, warnings, warned](const model::DocumentInput& doc,
                                            const std::vector<std::string>& decoded) {
    double r = rouge::rouge_reward(decoded, doc.reference_tokens, cfg.gamma1, cfg.gamma2);
    if (cfg.gamma_cloze <= 0.0) return r;
    const std::vector<cloze::ClozeQuestion>* bank = nullptr;
    if (banks) {
      auto it = banks->find(doc.doc_id);
      if (it != banks->end() && !it->second.empty()) bank = &it->second;
    }
    if (!bank || !qa) {
      if (warnings && !warned->count(doc.doc_id)) {
        warned->insert(doc.doc_id);
        warnings->push_back("doc " + doc.doc_id +
                            ": no question bank; falling back to ROUGE-only reward");
      }
      return r;
    }
    return r + cfg.gamma_cloze * cloze::cloze_reward(decoded, *bank, *qa);
  };
}

Trainer::Trainer(model::Summarizer& m, TrainingConfig cfg) : model_(m), cfg_(cfg) {
  cfg_.validate();
  opt_ = nn::Adam({cfg_.lr_ml});
}

double Trainer::evaluate_seq_loss(const std::vector<model::DocumentInput>& docs) {
  if (docs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& d : docs) {
    nn::Tape t;
    auto enc = model_.encode(t, d);
    total += t.scalar(model_.sequence_loss(t, enc, d));
  }
  return total / static_cast<double>(docs.size());
}

double Trainer::evaluate_ml_loss(const std::vector<model::DocumentInput>& docs) {
  if (docs.empty()) return 0.0;
  double seq_total = 0.0, mask_total = 0.0;
  long nodes = 0;
  for (const auto& d : docs) {
    nn::Tape t;
    auto enc = model_.encode(t, d);
    seq_total += t.scalar(model_.sequence_loss(t, enc, d));
    if (enc.has_graph && !d.salience.empty()) {
      mask_total += t.scalar(model_.mask_loss_sum(t, enc, d.salience));
      nodes += static_cast<long>(d.salience.size());
    }
  }
  double loss = seq_total / static_cast<double>(docs.size());
  if (nodes > 0) loss += mask_total / static_cast<double>(nodes);
  return loss;
}

Trainer::MlStepStats Trainer::ml_step(const std::vector<const model::DocumentInput*>& batch) {
  MlStepStats stats;
  for (const model::DocumentInput* d : batch)
    if (d->graph || d->seg) stats.nodes += static_cast<long>(d->salience.size());

  auto plist = model_.params().all();
  model_.params().zero_grads();
  double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const model::DocumentInput* d : batch) {
    nn::Tape t;
    auto enc = model_.encode(t, *d);
    nn::Value seq = model_.sequence_loss(t, enc, *d);
    nn::Value total = t.scale(seq, inv_b);
    if (enc.has_graph && !d->salience.empty() && stats.nodes > 0) {
      nn::Value mask = model_.mask_loss_sum(t, enc, d->salience);
      stats.mask_loss_sum += t.scalar(mask);
      total = t.add(total, t.scale(mask, 1.0 / static_cast<double>(stats.nodes)));
    }
    stats.seq_loss += t.scalar(seq) * inv_b;
    t.backward(total);
  }
  if (!std::isfinite(stats.seq_loss))
    throw std::runtime_error("training diverged: non-finite loss");
  nn::clip_global_norm(plist, cfg_.grad_clip);
  opt_.step(plist);
  return stats;
}

void Trainer::save_checkpoint(const std::string& dir, int epoch, double metric) const {
  fs::create_directories(dir);
  save_parameters(model_.params(), (fs::path(dir) / "params.bin").string());
  save_optimizer(model_.params(), opt_, (fs::path(dir) / "optimizer.bin").string());
  std::ofstream meta(fs::path(dir) / "meta.txt");
  meta << "epoch " << epoch << "\nmetric " << metric << "\n";
}

int load_checkpoint(model::Summarizer& m, nn::Adam* opt, const std::string& dir) {
  load_parameters(m.params(), (fs::path(dir) / "params.bin").string());
  if (opt && fs::exists(fs::path(dir) / "optimizer.bin"))
    load_optimizer(m.params(), *opt, (fs::path(dir) / "optimizer.bin").string());
  int epoch = -1;
  std::ifstream meta(fs::path(dir) / "meta.txt");
  if (meta) {
    std::string key;
    meta >> key >> epoch;
  }
  return epoch;
}

MlResult Trainer::train_ml(const std::vector<model::DocumentInput>& train,
                           const std::vector<model::DocumentInput>& val,
                           const std::string& ckpt_dir, const LogSink& log, int start_epoch) {
  if (train.empty()) throw std::invalid_argument("train_ml: empty corpus");
  opt_.set_lr(cfg_.lr_ml);
  MlResult result;
  long step = 0;
  for (int epoch = start_epoch; epoch < cfg_.ml_epochs; ++epoch) {
    // Epoch-seeded order so interrupted runs resume identically.
    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::mt19937_64 shuffle_rng(cfg_.seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_seq = 0.0;
    int batches = 0;
    for (size_t at = 0; at < order.size(); at += cfg_.batch_size) {
      std::vector<const model::DocumentInput*> batch;
      for (size_t k = at; k < order.size() && k < at + cfg_.batch_size; ++k)
        batch.push_back(&train[order[k]]);
      MlStepStats stats = ml_step(batch);
      epoch_seq += stats.seq_loss;
      ++batches;
      ++step;
      if (log)
        log({"ml", epoch, step, stats.seq_loss,
             stats.nodes > 0 ? stats.mask_loss_sum / stats.nodes : 0.0, 0.0});
    }
    result.epoch_train_seq_losses.push_back(epoch_seq / std::max(batches, 1));

    double val_loss = evaluate_ml_loss(val.empty() ? train : val);
    result.epoch_val_losses.push_back(val_loss);
    if (result.best_epoch < 0 || val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      if (!ckpt_dir.empty()) save_checkpoint(ckpt_dir, epoch, val_loss);
    }
  }
  return result;
}

double Trainer::rl_step(const std::vector<const model::DocumentInput*>& batch,
                        const RewardFn& reward, std::mt19937_64& rng) {
  auto plist = model_.params().all();
  model_.params().zero_grads();
  double inv_b = 1.0 / static_cast<double>(batch.size());
  double greedy_reward_sum = 0.0;
  for (const model::DocumentInput* d : batch) {
    model::Decoded greedy = model_.decode_greedy(*d, cfg_.max_len, cfg_.min_len);
    double r_greedy = reward(*d, greedy.tokens);
    greedy_reward_sum += r_greedy;

    nn::Tape t;
    model::SampledRollout roll = model_.sample_on_tape(t, *d, cfg_.max_len, rng);
    if (roll.step_logprobs.empty()) continue;
    double r_sample = reward(*d, roll.tokens);

    nn::Value sum_lp = roll.step_logprobs[0];
    for (size_t k = 1; k < roll.step_logprobs.size(); ++k)
      sum_lp = t.add(sum_lp, roll.step_logprobs[k]);
    // Rewards are constants; the gradient flows through the log-probs only.
    nn::Value loss = t.scale(sum_lp, -(r_sample - r_greedy) * inv_b);
    if (!std::isfinite(t.scalar(loss)))
      throw std::runtime_error("rl training diverged: non-finite loss");
    t.backward(loss);
  }
  nn::clip_global_norm(plist, cfg_.grad_clip);
  opt_.step(plist);
  return greedy_reward_sum * inv_b;
}

double Trainer::mean_greedy_rouge1(const std::vector<model::DocumentInput>& docs) {
  if (docs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& d : docs) {
    model::Decoded g = model_.decode_greedy(d, cfg_.max_len, cfg_.min_len);
    sum += rouge::rouge_n(g.tokens, d.reference_tokens, 1).f1;
  }
  return sum / static_cast<double>(docs.size());
}

RlResult Trainer::train_rl(const std::vector<model::DocumentInput>& train,
                           const std::vector<model::DocumentInput>& val, const RewardFn& reward,
                           const std::string& ckpt_dir, const LogSink& log) {
  if (train.empty()) throw std::invalid_argument("train_rl: empty corpus");
  opt_ = nn::Adam({cfg_.lr_rl});
  RlResult result;
  result.initial_greedy_rouge1 = mean_greedy_rouge1(train);

  auto mean_val_reward = [&](const std::vector<model::DocumentInput>& docs) {
    double sum = 0.0;
    for (const auto& d : docs) {
      model::Decoded g = model_.decode_greedy(d, cfg_.max_len, cfg_.min_len);
      sum += reward(d, g.tokens);
    }
    return docs.empty() ? 0.0 : sum / docs.size();
  };

  long step = 0;
  int stale = 0;
  for (int epoch = 0; epoch < cfg_.rl_epochs; ++epoch) {
    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::mt19937_64 shuffle_rng(cfg_.seed ^ (0xbf58476d1ce4e5b9ULL * (epoch + 1)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::mt19937_64 sample_rng(cfg_.seed + 7919 * (epoch + 1));

    double epoch_reward = 0.0;
    int batches = 0;
    for (size_t at = 0; at < order.size(); at += cfg_.batch_size) {
      std::vector<const model::DocumentInput*> batch;
      for (size_t k = at; k < order.size() && k < at + cfg_.batch_size; ++k)
        batch.push_back(&train[order[k]]);
      double mean_greedy = rl_step(batch, reward, sample_rng);
      epoch_reward += mean_greedy;
      ++batches;
      ++step;
      if (log) log({"rl", epoch, step, 0.0, 0.0, mean_greedy});
    }
    result.epoch_mean_greedy_rewards.push_back(epoch_reward / std::max(batches, 1));

    double val_reward = mean_val_reward(val.empty() ? train : val);
    if (result.best_epoch < 0 || val_reward > result.best_val_reward) {
      result.best_val_reward = val_reward;
      result.best_epoch = epoch;
      stale = 0;
      if (!ckpt_dir.empty()) save_checkpoint(ckpt_dir, epoch, val_reward);
    } else if (++stale >= cfg_.patience) {
      break;
    }
  }
  result.final_greedy_rouge1 = mean_greedy_rouge1(train);
  return result;
}

}  // namespace kgsum::train
