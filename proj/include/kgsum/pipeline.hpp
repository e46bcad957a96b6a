#pragma once

#include <string>
#include <vector>

#include "kgsum/config.hpp"
#include "kgsum/corpus.hpp"
#include "kgsum/graph.hpp"
#include "kgsum/model.hpp"

namespace kgsum::pipeline {

// A corpus with filtered triples, variant-appropriate graphs, and
// model-ready inputs. Graph storage is owned here; inputs point into it.
struct PreparedCorpus {
  std::vector<AnnotatedDocument> docs;
  std::vector<kg::KnowledgeGraph> graphs;  // docgraph variant
  std::vector<kg::SegGraphSet> segs;       // seggraph variant
  std::vector<model::DocumentInput> inputs;
};

// Loads a corpus file, filters triples, builds graphs for cfg.variant, and
// (when a vocabulary is given) assembles DocumentInputs.
PreparedCorpus prepare_corpus(const PipelineConfig& cfg, const std::string& path,
                              const Vocabulary* vocab, std::vector<Diagnostic>* diagnostics);

StopwordSet stopwords_for(const PipelineConfig& cfg);

int cmd_preprocess(const PipelineConfig& cfg);
int cmd_train(const PipelineConfig& cfg, bool resume);
int cmd_decode(const PipelineConfig& cfg, const std::string& checkpoint_dir,
               const std::string& out_file);
int cmd_evaluate(const PipelineConfig& cfg, const std::string& summaries_file);
int cmd_cloze_eval(const PipelineConfig& cfg, const std::string& summaries_file);
int cmd_stats(const PipelineConfig& cfg);

}  // namespace kgsum::pipeline
