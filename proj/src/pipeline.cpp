#include "kgsum/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "kgsum/checkpoint.hpp"
#include "kgsum/cloze.hpp"
#include "kgsum/rouge.hpp"
#include "kgsum/training.hpp"

namespace kgsum::pipeline {

namespace fs = std::filesystem;

StopwordSet stopwords_for(const PipelineConfig& cfg) {
  if (!cfg.stopwords_path.empty()) return load_stopwords(cfg.stopwords_path);
  return builtin_stopwords();
}

PreparedCorpus prepare_corpus(const PipelineConfig& cfg, const std::string& path,
                              const Vocabulary* vocab, std::vector<Diagnostic>* diagnostics) {
  PreparedCorpus out;
  LoadResult loaded = load_corpus(path, cfg.truncate_len);
  if (diagnostics)
    diagnostics->insert(diagnostics->end(), loaded.diagnostics.begin(),
                        loaded.diagnostics.end());
  out.docs.reserve(loaded.documents.size());
  for (auto& d : loaded.documents) {
    if (d.tokens.empty() || d.reference_tokens.empty()) {
      if (diagnostics)
        diagnostics->push_back({d.doc_id, "skipped: document needs tokens and reference tokens"});
      continue;
    }
    out.docs.push_back(std::move(d));
  }
  for (auto& d : out.docs) d.triples = kg::filter_triples(d.triples);

  model::Variant variant = model::variant_from_string(cfg.variant);
  if (variant == model::Variant::docgraph) {
    out.graphs.reserve(out.docs.size());
    for (const auto& d : out.docs) out.graphs.push_back(kg::build_doc_graph(d, cfg.min_nodes));
  } else if (variant == model::Variant::seggraph) {
    out.segs.reserve(out.docs.size());
    for (const auto& d : out.docs) out.segs.push_back(kg::build_seg_graphs(d));
  }

  if (vocab) {
    StopwordSet stop = stopwords_for(cfg);
    out.inputs.reserve(out.docs.size());
    for (size_t i = 0; i < out.docs.size(); ++i) {
      const kg::KnowledgeGraph* g =
          variant == model::Variant::docgraph ? &out.graphs[i] : nullptr;
      const kg::SegGraphSet* s = variant == model::Variant::seggraph ? &out.segs[i] : nullptr;
      out.inputs.push_back(model::prepare_input(*vocab, out.docs[i], g, s, stop));
    }
  }
  return out;
}

namespace {

struct SplitPaths {
  std::string name;
  std::string corpus;
};

std::vector<SplitPaths> splits_of(const PipelineConfig& cfg) {
  std::vector<SplitPaths> out;
  if (!cfg.train_corpus.empty()) out.push_back({"train", cfg.train_corpus});
  if (!cfg.val_corpus.empty()) out.push_back({"val", cfg.val_corpus});
  if (!cfg.test_corpus.empty()) out.push_back({"test", cfg.test_corpus});
  return out;
}

std::map<std::string, std::vector<cloze::ClozeQuestion>> load_banks(const std::string& path) {
  std::map<std::string, std::vector<cloze::ClozeQuestion>> banks;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing question bank: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    cloze::ClozeQuestion q = cloze::question_from_json(line);
    banks[q.doc_id].push_back(std::move(q));
  }
  return banks;
}

std::map<std::string, std::vector<std::string>> load_contexts(const std::string& path,
                                                              const PreparedCorpus& corpus) {
  std::map<std::string, std::vector<std::string>> out;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing salient-context file: " + path);
  std::map<std::string, const AnnotatedDocument*> by_id;
  for (const auto& d : corpus.docs) by_id[d.doc_id] = &d;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    std::string doc_id = j.at("doc_id").get<std::string>();
    auto it = by_id.find(doc_id);
    if (it == by_id.end()) continue;
    std::vector<std::string> text;
    for (int s : j.at("sentence_indices").get<std::vector<int>>()) {
      const auto& span = it->second->sentences.at(s);
      for (int k = span.start; k < span.end; ++k) text.push_back(it->second->tokens[k]);
    }
    out[doc_id] = std::move(text);
  }
  return out;
}

std::map<std::string, std::vector<std::string>> load_summaries(const std::string& path) {
  std::map<std::string, std::vector<std::string>> out;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing summaries file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    out[j.at("doc_id").get<std::string>()] = split_words(j.at("summary").get<std::string>());
  }
  return out;
}

void write_graph_dumps(const PipelineConfig& cfg, const PreparedCorpus& corpus,
                       const StopwordSet& stop, const std::string& path) {
  std::ofstream out(path);
  model::Variant variant = model::variant_from_string(cfg.variant);
  for (size_t i = 0; i < corpus.docs.size(); ++i) {
    const auto& d = corpus.docs[i];
    if (variant == model::Variant::seggraph) {
      for (const auto& g : corpus.segs[i].subgraphs) {
        auto labels = kg::label_node_salience(g, d.reference_tokens, stop);
        out << kg::dump_graph(d.doc_id, g, labels) << "\n";
      }
    } else {
      kg::KnowledgeGraph g = variant == model::Variant::docgraph
                                 ? corpus.graphs[i]
                                 : kg::build_doc_graph(d, cfg.min_nodes);
      auto labels = kg::label_node_salience(g, d.reference_tokens, stop);
      out << kg::dump_graph(d.doc_id, g, labels) << "\n";
    }
  }
}

struct CorpusStats {
  long docs = 0;
  long words = 0;
  long doc_entities = 0;
  long doc_predicates = 0;
  long paragraphs = 0;
  long seg_entities = 0;
  long seg_predicates = 0;
  long seg_subgraphs = 0;
};

CorpusStats collect_stats(const PipelineConfig& cfg, const PreparedCorpus& corpus) {
  CorpusStats st;
  for (size_t i = 0; i < corpus.docs.size(); ++i) {
    const auto& d = corpus.docs[i];
    ++st.docs;
    st.words += static_cast<long>(d.tokens.size());
    st.paragraphs += static_cast<long>(d.paragraphs.size());
    kg::KnowledgeGraph g = kg::build_doc_graph(d, cfg.min_nodes);
    for (const auto& n : g.nodes)
      (n.kind == kg::NodeKind::entity ? st.doc_entities : st.doc_predicates) += 1;
    kg::SegGraphSet seg = kg::build_seg_graphs(d);
    for (const auto& sub : seg.subgraphs) {
      ++st.seg_subgraphs;
      for (const auto& n : sub.nodes)
        (n.kind == kg::NodeKind::entity ? st.seg_entities : st.seg_predicates) += 1;
    }
  }
  return st;
}

std::string stats_table(const std::string& split, const CorpusStats& st) {
  auto per = [](long a, long b) { return b > 0 ? static_cast<double>(a) / b : 0.0; };
  std::ostringstream os;
  os << "split " << split << ": docs " << st.docs << ", avg words " << per(st.words, st.docs)
     << "\n";
  os << "  docgraph: args/doc " << per(st.doc_entities, st.docs) << ", predicates/doc "
     << per(st.doc_predicates, st.docs) << "\n";
  os << "  seggraph: args/paragraph " << per(st.seg_entities, st.seg_subgraphs)
     << ", predicates/paragraph " << per(st.seg_predicates, st.seg_subgraphs)
     << ", paragraphs/doc " << per(st.paragraphs, st.docs) << "\n";
  return os.str();
}

std::vector<std::string> parse_stages(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "qa" || item == "ml" || item == "rl") out.push_back(item);
    else if (!item.empty()) throw std::runtime_error("unknown training stage: " + item);
  }
  return out;
}

}  // namespace

int cmd_preprocess(const PipelineConfig& cfg) {
  if (cfg.train_corpus.empty()) {
    std::cerr << "preprocess: data.train_corpus is required\n";
    return 2;
  }
  fs::create_directories(cfg.outdir);
  StopwordSet stop = stopwords_for(cfg);

  // Fluency model and vocabulary are fitted on the training split.
  std::vector<Diagnostic> diags;
  PreparedCorpus train = prepare_corpus(cfg, cfg.train_corpus, nullptr, &diags);
  Vocabulary vocab = Vocabulary::build(train.docs, cfg.vocab_max);
  vocab.save((fs::path(cfg.outdir) / "vocab.txt").string());
  cloze::BigramFluencyScorer fluency;
  fluency.fit(train.docs);

  std::ofstream snapshot(fs::path(cfg.outdir) / "config.snapshot.ini");
  snapshot << dump_pipeline_config(cfg);

  for (const auto& split : splits_of(cfg)) {
    PreparedCorpus corpus =
        split.name == "train" ? std::move(train) : prepare_corpus(cfg, split.corpus, nullptr, &diags);

    write_graph_dumps(cfg, corpus, stop,
                      (fs::path(cfg.outdir) / (split.name + ".graphs.jsonl")).string());

    std::ofstream ctx_out(fs::path(cfg.outdir) / (split.name + ".contexts.jsonl"));
    std::ofstream q_out(fs::path(cfg.outdir) / (split.name + ".questions.jsonl"));
    long questions = 0, dropped = 0;
    for (const auto& d : corpus.docs) {
      cloze::SalientContext ctx = cloze::select_salient_context(d);
      nlohmann::ordered_json j;
      j["doc_id"] = d.doc_id;
      j["sentence_indices"] = ctx.sentences;
      ctx_out << j.dump() << "\n";
      cloze::QuestionBuild qb = cloze::build_questions(d, ctx, fluency, stop, cfg.seed);
      for (const auto& q : qb.questions) q_out << cloze::question_to_json(q) << "\n";
      questions += static_cast<long>(qb.questions.size());
      dropped += static_cast<long>(qb.diagnostics.size());
    }

    CorpusStats st = collect_stats(cfg, corpus);
    std::cout << stats_table(split.name, st);
    std::cout << "  questions: " << questions << " built, " << dropped << " dropped\n";
  }
  if (!diags.empty()) {
    std::cout << diags.size() << " document(s) skipped:\n";
    for (const auto& d : diags) std::cout << "  " << d.doc_id << ": " << d.message << "\n";
  }
  return 0;
}

int cmd_train(const PipelineConfig& cfg, bool resume) {
  if (cfg.train_corpus.empty()) {
    std::cerr << "train: data.train_corpus is required\n";
    return 2;
  }
  fs::path out(cfg.outdir);
  auto stages = parse_stages(cfg.stages);
  if (stages.empty()) {
    std::cerr << "train: no stages selected (training.stages)\n";
    return 2;
  }

  if (std::find(stages.begin(), stages.end(), "qa") != stages.end()) {
    std::string bank_path = (out / "train.questions.jsonl").string();
    std::string ctx_path = (out / "train.contexts.jsonl").string();
    if (!fs::exists(bank_path) || !fs::exists(ctx_path)) {
      std::cerr << "train qa: missing " << bank_path << " (run preprocess first)\n";
      return 2;
    }
    PreparedCorpus corpus = prepare_corpus(cfg, cfg.train_corpus, nullptr, nullptr);
    auto banks = load_banks(bank_path);
    auto contexts = load_contexts(ctx_path, corpus);
    std::vector<cloze::ClozeQuestion> flat;
    for (auto& [id, qs] : banks)
      for (auto& q : qs) flat.push_back(q);
    cloze::QaTrainConfig qa_cfg;
    qa_cfg.seed = cfg.seed;
    cloze::TrainableQaScorer scorer(qa_cfg);
    cloze::QaFitStats st = scorer.fit(flat, contexts);
    scorer.save((out / "qa_scorer.bin").string());
    std::cout << "qa scorer: " << st.train_count << " train, " << st.holdout_count
              << " held out, holdout accuracy " << st.holdout_accuracy << "\n";
  }

  bool want_ml = std::find(stages.begin(), stages.end(), "ml") != stages.end();
  bool want_rl = std::find(stages.begin(), stages.end(), "rl") != stages.end();
  if (!want_ml && !want_rl) return 0;

  std::string vocab_path = (out / "vocab.txt").string();
  if (!fs::exists(vocab_path)) {
    std::cerr << "train: missing " << vocab_path << " (run preprocess first)\n";
    return 2;
  }
  Vocabulary vocab = Vocabulary::load(vocab_path);
  PreparedCorpus train_c = prepare_corpus(cfg, cfg.train_corpus, &vocab, nullptr);
  PreparedCorpus val_c;
  if (!cfg.val_corpus.empty()) val_c = prepare_corpus(cfg, cfg.val_corpus, &vocab, nullptr);

  model::Summarizer model(cfg.model_config(vocab.size()), cfg.seed);
  train::Trainer trainer(model, cfg.training);

  bool fresh_log = !fs::exists(out / "train_log.tsv") || fs::file_size(out / "train_log.tsv") == 0;
  std::ofstream log_file(out / "train_log.tsv", std::ios::app);
  if (fresh_log) log_file << "stage\tepoch\tstep\tloss_seq\tloss_mask\tmean_reward\n";
  auto log = [&](const train::LogRow& row) { log_file << train::log_row_tsv(row) << "\n"; };

  if (want_ml) {
    int start_epoch = 0;
    std::string ml_dir = (out / "ml_best").string();
    if (resume && fs::exists(fs::path(ml_dir) / "params.bin"))
      start_epoch = train::load_checkpoint(model, &trainer.optimizer(), ml_dir) + 1;
    train::MlResult res =
        trainer.train_ml(train_c.inputs, val_c.inputs, ml_dir, log, start_epoch);
    std::ofstream(fs::path(ml_dir) / "config.ini") << dump_pipeline_config(cfg);
    std::cout << "ml stage: best validation loss " << res.best_val_loss << " at epoch "
              << res.best_epoch << "\n";
  }

  if (want_rl) {
    std::string ml_dir = (out / "ml_best").string();
    if (!fs::exists(fs::path(ml_dir) / "params.bin")) {
      std::cerr << "train rl: missing ML checkpoint " << ml_dir << "/params.bin\n";
      return 2;
    }
    train::load_checkpoint(model, nullptr, ml_dir);

    std::map<std::string, std::vector<cloze::ClozeQuestion>> banks;
    std::unique_ptr<cloze::TrainableQaScorer> qa;
    if (cfg.reward.gamma_cloze > 0.0) {
      std::string qa_path = (out / "qa_scorer.bin").string();
      if (!fs::exists(qa_path)) {
        std::cerr << "train rl: missing trained QA scorer " << qa_path
                  << " (run train with stages=qa, or set reward.gamma_cloze = 0)\n";
        return 2;
      }
      qa = cloze::TrainableQaScorer::load(qa_path);
      std::string bank_path = (out / "train.questions.jsonl").string();
      if (fs::exists(bank_path)) banks = load_banks(bank_path);
    }
    std::vector<std::string> warnings;
    train::RewardFn reward =
        train::make_composite_reward(cfg.reward, &banks, qa.get(), &warnings);
    train::RlResult res =
        trainer.train_rl(train_c.inputs, val_c.inputs, reward, (out / "rl_best").string(), log);
    if (fs::exists(out / "rl_best"))
      std::ofstream(out / "rl_best" / "config.ini") << dump_pipeline_config(cfg);
    for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
    std::cout << "rl stage: best validation reward " << res.best_val_reward << " at epoch "
              << res.best_epoch << "\n";
  }
  return 0;
}

int cmd_decode(const PipelineConfig& cfg, const std::string& checkpoint_dir,
               const std::string& out_file) {
  fs::path out(cfg.outdir);
  std::string corpus_path = !cfg.test_corpus.empty() ? cfg.test_corpus : cfg.train_corpus;
  if (corpus_path.empty()) {
    std::cerr << "decode: no corpus configured\n";
    return 2;
  }
  std::string vocab_path = (out / "vocab.txt").string();
  if (!fs::exists(vocab_path)) {
    std::cerr << "decode: missing " << vocab_path << " (run preprocess first)\n";
    return 2;
  }
  std::string ckpt = checkpoint_dir;
  if (ckpt.empty())
    ckpt = fs::exists(out / "rl_best" / "params.bin") ? (out / "rl_best").string()
                                                      : (out / "ml_best").string();
  if (!fs::exists(fs::path(ckpt) / "params.bin")) {
    std::cerr << "decode: missing checkpoint " << ckpt << "/params.bin\n";
    return 2;
  }

  Vocabulary vocab = Vocabulary::load(vocab_path);
  PreparedCorpus corpus = prepare_corpus(cfg, corpus_path, &vocab, nullptr);
  model::Summarizer model(cfg.model_config(vocab.size()), cfg.seed);
  train::load_checkpoint(model, nullptr, ckpt);

  std::string path = out_file.empty() ? (out / "summaries.jsonl").string() : out_file;
  std::ofstream sink(path);
  if (!sink) {
    std::cerr << "decode: cannot write " << path << "\n";
    return 2;
  }
  for (const auto& input : corpus.inputs) {
    model::Decoded dec =
        cfg.beam > 1 ? model.decode_beam(input, cfg.training.max_len, cfg.training.min_len, cfg.beam)
                     : model.decode_greedy(input, cfg.training.max_len, cfg.training.min_len);
    std::string text;
    for (size_t i = 0; i < dec.tokens.size(); ++i) {
      if (i) text += ' ';
      text += dec.tokens[i];
    }
    nlohmann::ordered_json j;
    j["doc_id"] = input.doc_id;
    j["summary"] = text;
    j["token_count"] = dec.tokens.size();
    sink << j.dump() << "\n";
  }
  std::cout << "decoded " << corpus.inputs.size() << " documents to " << path << "\n";
  return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, const std::string& summaries_file) {
  fs::path out(cfg.outdir);
  std::string corpus_path = !cfg.test_corpus.empty() ? cfg.test_corpus : cfg.train_corpus;
  std::string summaries_path =
      summaries_file.empty() ? (out / "summaries.jsonl").string() : summaries_file;
  auto summaries = load_summaries(summaries_path);
  PreparedCorpus corpus = prepare_corpus(cfg, corpus_path, nullptr, nullptr);

  std::ofstream table(out / "eval_rouge.tsv");
  table << "doc_id\tr1_f\tr2_f\trl_f\n";
  double r1 = 0, r2 = 0, rl = 0;
  long n = 0;
  for (const auto& d : corpus.docs) {
    auto it = summaries.find(d.doc_id);
    if (it == summaries.end()) {
      std::cerr << "evaluate: missing summary for document " << d.doc_id << "\n";
      return 2;
    }
    auto s1 = rouge::rouge_n(it->second, d.reference_tokens, 1);
    auto s2 = rouge::rouge_n(it->second, d.reference_tokens, 2);
    auto sl = rouge::rouge_l(it->second, d.reference_tokens);
    table << d.doc_id << "\t" << s1.f1 << "\t" << s2.f1 << "\t" << sl.f1 << "\n";
    r1 += s1.f1;
    r2 += s2.f1;
    rl += sl.f1;
    ++n;
  }
  if (n == 0) {
    std::cerr << "evaluate: empty corpus\n";
    return 2;
  }
  std::ostringstream report;
  report << "documents\t" << n << "\n";
  report << "rouge1_f\t" << r1 / n << "\n";
  report << "rouge2_f\t" << r2 / n << "\n";
  report << "rougeL_f\t" << rl / n << "\n";

  // Cloze metrics when a bank and scorer are available.
  std::string bank_path = (out / "test.questions.jsonl").string();
  if (!fs::exists(bank_path)) bank_path = (out / "train.questions.jsonl").string();
  std::string qa_path = (out / "qa_scorer.bin").string();
  if (fs::exists(bank_path) && fs::exists(qa_path)) {
    auto banks = load_banks(bank_path);
    auto qa = cloze::TrainableQaScorer::load(qa_path);
    cloze::ClozeEval ce = cloze::cloze_evaluate(summaries, banks, *qa);
    report << "cloze_probability\t" << ce.mean_probability << "\n";
    report << "cloze_accuracy\t" << ce.accuracy << "\n";
  }
  std::cout << report.str();
  std::ofstream(out / "eval_summary.tsv") << report.str();

  // Score distributions by summary, sorted, for plotting.
  std::ifstream rows(out / "eval_rouge.tsv");
  std::string line;
  std::getline(rows, line);
  std::vector<double> d1, d2, dl;
  while (std::getline(rows, line)) {
    std::istringstream is(line);
    std::string id;
    double a, b, c;
    is >> id >> a >> b >> c;
    d1.push_back(a);
    d2.push_back(b);
    dl.push_back(c);
  }
  std::sort(d1.begin(), d1.end());
  std::sort(d2.begin(), d2.end());
  std::sort(dl.begin(), dl.end());
  std::ofstream dist(out / "eval_distribution.tsv");
  dist << "quantile\tr1_f\tr2_f\trl_f\n";
  for (size_t i = 0; i < d1.size(); ++i)
    dist << (i + 1.0) / d1.size() << "\t" << d1[i] << "\t" << d2[i] << "\t" << dl[i] << "\n";
  return 0;
}

int cmd_cloze_eval(const PipelineConfig& cfg, const std::string& summaries_file) {
  fs::path out(cfg.outdir);
  std::string summaries_path =
      summaries_file.empty() ? (out / "summaries.jsonl").string() : summaries_file;
  auto summaries = load_summaries(summaries_path);

  std::string bank_path = (out / "test.questions.jsonl").string();
  if (!fs::exists(bank_path)) bank_path = (out / "train.questions.jsonl").string();
  auto banks = load_banks(bank_path);
  std::string qa_path = (out / "qa_scorer.bin").string();
  if (!fs::exists(qa_path)) {
    std::cerr << "cloze-eval: missing trained QA scorer " << qa_path << "\n";
    return 2;
  }
  auto qa = cloze::TrainableQaScorer::load(qa_path);
  cloze::ClozeEval ce = cloze::cloze_evaluate(summaries, banks, *qa);

  std::ofstream table(out / "cloze_eval.tsv");
  table << "doc_id\tmean_probability\taccuracy\tquestions\n";
  for (const auto& s : ce.per_summary)
    table << s.doc_id << "\t" << s.mean_probability << "\t" << s.accuracy << "\t"
          << s.num_questions << "\n";
  std::cout << "summaries\t" << ce.per_summary.size() << "\n";
  std::cout << "cloze_probability\t" << ce.mean_probability << "\n";
  std::cout << "cloze_accuracy\t" << ce.accuracy << "\n";
  return 0;
}

int cmd_stats(const PipelineConfig& cfg) {
  bool any = false;
  for (const auto& split : splits_of(cfg)) {
    PreparedCorpus corpus = prepare_corpus(cfg, split.corpus, nullptr, nullptr);
    std::cout << stats_table(split.name, collect_stats(cfg, corpus));
    any = true;
  }
  if (!any) {
    std::cerr << "stats: no corpus configured\n";
    return 2;
  }
  return 0;
}

}  // namespace kgsum::pipeline
