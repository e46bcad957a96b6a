#include "kgsum/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kgsum {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::map<std::string, std::string> read_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line, section;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line is not key = value: " + line);
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    kv[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::map<std::string, std::string>& kv) {
  PipelineConfig cfg;
  auto geti = [&](const std::string& k, int& out) { out = std::stoi(kv.at(k)); };
  auto getd = [&](const std::string& k, double& out) { out = std::stod(kv.at(k)); };
  auto gets = [&](const std::string& k, std::string& out) { out = kv.at(k); };

  for (const auto& [key, value] : kv) {
    try {
      if (key == "data.train_corpus") gets(key, cfg.train_corpus);
      else if (key == "data.val_corpus") gets(key, cfg.val_corpus);
      else if (key == "data.test_corpus") gets(key, cfg.test_corpus);
      else if (key == "data.stopwords") gets(key, cfg.stopwords_path);
      else if (key == "data.truncate_len") geti(key, cfg.truncate_len);
      else if (key == "data.vocab_max") geti(key, cfg.vocab_max);
      else if (key == "model.variant") gets(key, cfg.variant);
      else if (key == "model.embed_dim") geti(key, cfg.embed_dim);
      else if (key == "model.hidden_dim") geti(key, cfg.hidden_dim);
      else if (key == "model.node_dim") geti(key, cfg.node_dim);
      else if (key == "model.num_heads") geti(key, cfg.num_heads);
      else if (key == "model.head_dim") geti(key, cfg.head_dim);
      else if (key == "model.num_layers") geti(key, cfg.num_layers);
      else if (key == "model.attn_dim") geti(key, cfg.attn_dim);
      else if (key == "graph.min_nodes") geti(key, cfg.min_nodes);
      else if (key == "training.lr_ml") getd(key, cfg.training.lr_ml);
      else if (key == "training.lr_rl") getd(key, cfg.training.lr_rl);
      else if (key == "training.grad_clip") getd(key, cfg.training.grad_clip);
      else if (key == "training.batch_size") geti(key, cfg.training.batch_size);
      else if (key == "training.ml_epochs") geti(key, cfg.training.ml_epochs);
      else if (key == "training.rl_epochs") geti(key, cfg.training.rl_epochs);
      else if (key == "training.patience") geti(key, cfg.training.patience);
      else if (key == "training.stages") gets(key, cfg.stages);
      else if (key == "reward.gamma1") getd(key, cfg.reward.gamma1);
      else if (key == "reward.gamma2") getd(key, cfg.reward.gamma2);
      else if (key == "reward.gamma_cloze") getd(key, cfg.reward.gamma_cloze);
      else if (key == "decode.max_len") geti(key, cfg.training.max_len);
      else if (key == "decode.min_len") geti(key, cfg.training.min_len);
      else if (key == "decode.beam") geti(key, cfg.beam);
      else if (key == "output.dir") gets(key, cfg.outdir);
      else if (key == "seed") { cfg.seed = std::stoull(kv.at(key)); cfg.training.seed = cfg.seed; }
      else throw std::runtime_error("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("bad value for config key " + key + ": " + value);
    }
  }
  if (kv.count("model.node_dim") && cfg.node_dim != cfg.num_heads * cfg.head_dim)
    throw std::runtime_error("model.node_dim must equal num_heads * head_dim");
  cfg.node_dim = cfg.num_heads * cfg.head_dim;
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  return parse_pipeline_config(read_kv(path));
}

void PipelineConfig::validate() const {
  model::variant_from_string(variant);  // throws on bad names
  if (truncate_len <= 0) throw std::runtime_error("truncate_len must be positive");
  if (min_nodes < 1) throw std::runtime_error("min_nodes must be >= 1");
  if (beam < 1) throw std::runtime_error("beam must be >= 1");
  training.validate();
  reward.validate();
}

model::ModelConfig PipelineConfig::model_config(int vocab_size) const {
  model::ModelConfig mc;
  mc.variant = model::variant_from_string(variant);
  mc.vocab_size = vocab_size;
  mc.embed_dim = embed_dim;
  mc.hidden_dim = hidden_dim;
  mc.num_heads = num_heads;
  mc.head_dim = head_dim;
  mc.num_layers = num_layers;
  mc.attn_dim = attn_dim;
  return mc;
}

std::string dump_pipeline_config(const PipelineConfig& cfg) {
  std::ostringstream os;
  os << "seed = " << cfg.seed << "\n";
  os << "[data]\n";
  os << "train_corpus = " << cfg.train_corpus << "\n";
  os << "val_corpus = " << cfg.val_corpus << "\n";
  os << "test_corpus = " << cfg.test_corpus << "\n";
  os << "stopwords = " << cfg.stopwords_path << "\n";
  os << "truncate_len = " << cfg.truncate_len << "\n";
  os << "vocab_max = " << cfg.vocab_max << "\n";
  os << "[model]\n";
  os << "variant = " << cfg.variant << "\n";
  os << "embed_dim = " << cfg.embed_dim << "\n";
  os << "hidden_dim = " << cfg.hidden_dim << "\n";
  os << "node_dim = " << cfg.node_dim << "\n";
  os << "num_heads = " << cfg.num_heads << "\n";
  os << "head_dim = " << cfg.head_dim << "\n";
  os << "num_layers = " << cfg.num_layers << "\n";
  os << "attn_dim = " << cfg.attn_dim << "\n";
  os << "[graph]\n";
  os << "min_nodes = " << cfg.min_nodes << "\n";
  os << "[training]\n";
  os << "lr_ml = " << cfg.training.lr_ml << "\n";
  os << "lr_rl = " << cfg.training.lr_rl << "\n";
  os << "grad_clip = " << cfg.training.grad_clip << "\n";
  os << "batch_size = " << cfg.training.batch_size << "\n";
  os << "ml_epochs = " << cfg.training.ml_epochs << "\n";
  os << "rl_epochs = " << cfg.training.rl_epochs << "\n";
  os << "patience = " << cfg.training.patience << "\n";
  os << "stages = " << cfg.stages << "\n";
  os << "[reward]\n";
  os << "gamma1 = " << cfg.reward.gamma1 << "\n";
  os << "gamma2 = " << cfg.reward.gamma2 << "\n";
  os << "gamma_cloze = " << cfg.reward.gamma_cloze << "\n";
  os << "[decode]\n";
  os << "max_len = " << cfg.training.max_len << "\n";
  os << "min_len = " << cfg.training.min_len << "\n";
  os << "beam = " << cfg.beam << "\n";
  os << "[output]\n";
  os << "dir = " << cfg.outdir << "\n";
  return os.str();
}

}  // namespace kgsum
