#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kgsum/cloze.hpp"
#include "kgsum/model.hpp"
#include "kgsum/nn/optim.hpp"

namespace kgsum::train {

struct TrainingConfig {
  double lr_ml = 1e-3;
  double lr_rl = 1e-4;
  double grad_clip = 2.0;
  int batch_size = 32;
  int ml_epochs = 10;
  int rl_epochs = 5;
  int patience = 2;  // RL early stopping on the validation reward
  int max_len = 120;
  int min_len = 10;
  std::uint64_t seed = 1;
  void validate() const;
};

struct RewardConfig {
  double gamma1 = 0.33;
  double gamma2 = 0.33;
  double gamma_cloze = 0.05;
  void validate() const;
};

struct LogRow {
  std::string stage;
  int epoch = 0;
  long step = 0;
  double loss_seq = 0.0;
  double loss_mask = 0.0;
  double mean_reward = 0.0;
};
using LogSink = std::function<void(const LogRow&)>;

std::string log_row_tsv(const LogRow& row);

// -(R(sample) - R(greedy)) * sum log p(sample), rewards held constant.
double self_critical_loss(double reward_sample, double reward_greedy, double sum_logprob);

// Reward of a decoded summary for one document.
using RewardFn =
    std::function<double(const model::DocumentInput&, const std::vector<std::string>&)>;

// ROUGE mixture plus gamma_cloze * cloze reward. Documents without a
// question bank fall back to the ROUGE-only reward; the first such document
// appends a warning.
RewardFn make_composite_reward(const RewardConfig& cfg,
                               const std::map<std::string, std::vector<cloze::ClozeQuestion>>* banks,
                               const cloze::QaScorer* qa, std::vector<std::string>* warnings);

struct MlResult {
  double best_val_loss = 0.0;
  int best_epoch = -1;
  std::vector<double> epoch_val_losses;
  std::vector<double> epoch_train_seq_losses;
};

struct RlResult {
  double best_val_reward = 0.0;
  int best_epoch = -1;
  std::vector<double> epoch_mean_greedy_rewards;
  double initial_greedy_rouge1 = 0.0;
  double final_greedy_rouge1 = 0.0;
};

class Trainer {
 public:
  Trainer(model::Summarizer& m, TrainingConfig cfg);

  // Mean per-token sequence loss over a corpus (forward only).
  double evaluate_seq_loss(const std::vector<model::DocumentInput>& docs);
  // Full ML objective: mean sequence loss + node-mean mask loss.
  double evaluate_ml_loss(const std::vector<model::DocumentInput>& docs);

  // Minimizes L_seq + L_mask. When ckpt_dir is non-empty the best-validation
  // checkpoint (parameters + optimizer + meta) is written there. start_epoch
  // resumes an interrupted run deterministically at an epoch boundary.
  MlResult train_ml(const std::vector<model::DocumentInput>& train,
                    const std::vector<model::DocumentInput>& val, const std::string& ckpt_dir,
                    const LogSink& log, int start_epoch = 0);

  RlResult train_rl(const std::vector<model::DocumentInput>& train,
                    const std::vector<model::DocumentInput>& val, const RewardFn& reward,
                    const std::string& ckpt_dir, const LogSink& log);

  // One self-critical update over a batch; returns the batch mean greedy
  // reward. Exposed for the toy RL experiments.
  double rl_step(const std::vector<const model::DocumentInput*>& batch, const RewardFn& reward,
                 std::mt19937_64& rng);

  // One ML update over a batch; returns (mean seq loss, mask loss sum,
  // node count).
  struct MlStepStats {
    double seq_loss = 0.0;
    double mask_loss_sum = 0.0;
    long nodes = 0;
  };
  MlStepStats ml_step(const std::vector<const model::DocumentInput*>& batch);

  nn::Adam& optimizer() { return opt_; }
  double mean_greedy_rouge1(const std::vector<model::DocumentInput>& docs);

 private:
  model::Summarizer& model_;
  TrainingConfig cfg_;
  nn::Adam opt_;

  void save_checkpoint(const std::string& dir, int epoch, double metric) const;
};

// Loads parameters (and optimizer state when present) from a checkpoint
// directory written by the trainer. Returns the stored epoch.
int load_checkpoint(model::Summarizer& m, nn::Adam* opt, const std::string& dir);

}  // namespace kgsum::train
