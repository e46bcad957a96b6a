#pragma once

#include <map>
#include <string>

#include "kgsum/model.hpp"
#include "kgsum/training.hpp"

namespace kgsum {

// Flat key-value configuration with one section per module. Unknown keys
// are rejected so typos fail loudly.
struct PipelineConfig {
  // [data]
  std::string train_corpus;
  std::string val_corpus;
  std::string test_corpus;
  std::string stopwords_path;  // empty: built-in list
  int truncate_len = 1024;
  int vocab_max = 0;  // 0: unlimited

  // [model]
  std::string variant = "docgraph";
  int embed_dim = 128;
  int hidden_dim = 256;
  int node_dim = 288;  // num_heads * head_dim
  int num_heads = 4;
  int head_dim = 72;
  int num_layers = 2;
  int attn_dim = 128;

  // [graph]
  int min_nodes = 3;

  // [training]
  train::TrainingConfig training;
  std::string stages = "ml";  // comma-separated subset of qa,ml,rl

  // [reward]
  train::RewardConfig reward;

  // [decode]
  int beam = 1;

  // [output]
  std::string outdir = "out";

  std::uint64_t seed = 1;

  model::ModelConfig model_config(int vocab_size) const;
  void validate() const;
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::map<std::string, std::string>& kv);
std::string dump_pipeline_config(const PipelineConfig& cfg);

}  // namespace kgsum
