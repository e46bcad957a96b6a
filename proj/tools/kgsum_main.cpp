#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kgsum/config.hpp"
#include "kgsum/pipeline.hpp"

namespace {

// Applies --set key=value overrides on top of the config file.
kgsum::PipelineConfig resolve_config(const std::string& config_path,
                                     const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) {
    // Reparse through the file loader to keep one source of truth, then
    // merge overrides.
    kgsum::PipelineConfig base = kgsum::load_pipeline_config(config_path);
    std::string dumped = kgsum::dump_pipeline_config(base);
    std::istringstream is(dumped);
    std::string line, section;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line.front() == '[') {
        section = line.substr(1, line.size() - 2);
        continue;
      }
      size_t eq = line.find(" = ");
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 3);
      if (!value.empty()) kv[section.empty() ? key : section + "." + key] = value;
    }
  }
  bool node_dim_set = false;
  for (const auto& o : overrides) {
    size_t eq = o.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--set expects key=value, got: " + o);
    std::string key = o.substr(0, eq);
    if (key == "model.node_dim") node_dim_set = true;
    kv[key] = o.substr(eq + 1);
  }
  // node_dim is derived from num_heads * head_dim unless pinned explicitly.
  if (!node_dim_set) kv.erase("model.node_dim");
  return kgsum::parse_pipeline_config(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph-augmented abstractive summarizer"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "Pipeline config file (INI)");
  app.add_option("--set", overrides, "Override a config key, e.g. --set model.variant=seggraph");

  auto* preprocess = app.add_subcommand(
      "preprocess", "Build graphs, salience labels, salient contexts, and question banks");
  auto* train = app.add_subcommand("train", "Run the qa/ml/rl training stages");
  bool resume = false;
  train->add_flag("--resume", resume, "Resume ML training from the saved checkpoint");
  auto* decode = app.add_subcommand("decode", "Decode summaries with a trained checkpoint");
  std::string checkpoint, decode_out;
  decode->add_option("--checkpoint", checkpoint, "Checkpoint directory (default: best available)");
  decode->add_option("-o,--output", decode_out, "Summaries output file");
  auto* evaluate = app.add_subcommand("evaluate", "ROUGE (and cloze) evaluation of summaries");
  std::string summaries;
  evaluate->add_option("--summaries", summaries, "Summaries file (default: <outdir>/summaries.jsonl)");
  auto* cloze_eval = app.add_subcommand("cloze-eval", "Cloze probability/accuracy of summaries");
  std::string cloze_summaries;
  cloze_eval->add_option("--summaries", cloze_summaries, "Summaries file");
  auto* stats = app.add_subcommand("stats", "Corpus and graph statistics");

  CLI11_PARSE(app, argc, argv);

  try {
    kgsum::PipelineConfig cfg = resolve_config(config_path, overrides);
    if (preprocess->parsed()) return kgsum::pipeline::cmd_preprocess(cfg);
    if (train->parsed()) return kgsum::pipeline::cmd_train(cfg, resume);
    if (decode->parsed()) return kgsum::pipeline::cmd_decode(cfg, checkpoint, decode_out);
    if (evaluate->parsed()) return kgsum::pipeline::cmd_evaluate(cfg, summaries);
    if (cloze_eval->parsed()) return kgsum::pipeline::cmd_cloze_eval(cfg, cloze_summaries);
    if (stats->parsed()) return kgsum::pipeline::cmd_stats(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
