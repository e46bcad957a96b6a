#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgsum/corpus.hpp"
#include "kgsum/nn/tape.hpp"
#include "kgsum/text.hpp"
#include "kgsum/vocab.hpp"

namespace kgsum::cloze {

struct SalientContext {
  std::vector<int> sentences;     // source sentence indices, document order
  std::vector<std::string> text;  // tokens of those sentences, concatenated
};

// ROUGE-2 F1 of a sentence set against the reference. Bigrams are counted
// within sentences only; a bigram cannot form across the seam of two
// selected sentences, which keeps greedy and exhaustive search comparable.
double sentence_set_rouge2_f1(const AnnotatedDocument& doc, const std::vector<int>& sentences);

// Greedy forward selection: repeatedly add the source sentence that most
// increases ROUGE-2 F1 of the selected set against the reference; stop when
// no sentence produces a gain. Exposed separately so it can be checked
// against the exhaustive-subset oracle.
std::vector<int> greedy_rouge2_selection(const AnnotatedDocument& doc);

// Greedy selection plus recall augmentation: any sentence whose ROUGE-L
// recall against a single reference sentence exceeds 0.6 is also included.
SalientContext select_salient_context(const AnnotatedDocument& doc);

enum class QuestionKind { argument_pair, predicate, entity_pair };
std::string kind_to_string(QuestionKind k);
QuestionKind kind_from_string(const std::string& s);

// Blank markers are "___": two for argument_pair/entity_pair questions, one
// for predicate questions. Pair answers join their parts with ", ".
struct ClozeQuestion {
  QuestionKind kind = QuestionKind::argument_pair;
  std::string question_text;
  std::array<std::string, 4> candidates;
  int correct_index = 0;
  std::string doc_id;
};

class FluencyScorer {
 public:
  virtual ~FluencyScorer() = default;
  virtual double perplexity(const std::vector<std::string>& tokens) const = 0;
};

// Add-k smoothed bigram model fitted on corpus tokens; the default
// candidate-ranking scorer.
class BigramFluencyScorer : public FluencyScorer {
 public:
  explicit BigramFluencyScorer(double alpha = 0.1) : alpha_(alpha) {}
  void fit(const std::vector<AnnotatedDocument>& docs);
  double perplexity(const std::vector<std::string>& tokens) const override;

 private:
  std::unordered_map<std::string, long> unigrams_;
  std::unordered_map<std::string, long> bigrams_;
  double alpha_;
  long vocab_size_ = 1;
};

struct QuestionBuild {
  std::vector<ClozeQuestion> questions;
  std::vector<Diagnostic> diagnostics;
};

// Builds argument-pair and predicate questions from the reference triples
// (entity-pair questions when there are none), mining distractors from the
// salient context. Deterministic given (document, reference, seed).
QuestionBuild build_questions(const AnnotatedDocument& doc, const SalientContext& ctx,
                              const FluencyScorer& fluency, const StopwordSet& stopwords,
                              std::uint64_t seed);

std::string question_to_json(const ClozeQuestion& q);
ClozeQuestion question_from_json(const std::string& line);

class QaScorer {
 public:
  virtual ~QaScorer() = default;
  // Probability simplex over the four candidates, reading `context`.
  virtual Eigen::Vector4d score(const std::vector<std::string>& context,
                                const ClozeQuestion& q) const = 0;
};

// Mean probability assigned to the correct answers; 0 when there are no
// questions.
double cloze_reward(const std::vector<std::string>& summary_tokens,
                    const std::vector<ClozeQuestion>& questions, const QaScorer& qa);

struct SummaryClozeScore {
  std::string doc_id;
  double mean_probability = 0.0;
  double accuracy = 0.0;
  int num_questions = 0;
};

struct ClozeEval {
  double mean_probability = 0.0;  // mean of per-summary means
  double accuracy = 0.0;
  std::vector<SummaryClozeScore> per_summary;
};

// One score per summary, then averaged over summaries. Summaries and banks
// align by doc_id; summaries without questions are skipped.
ClozeEval cloze_evaluate(const std::map<std::string, std::vector<std::string>>& summaries,
                         const std::map<std::string, std::vector<ClozeQuestion>>& banks,
                         const QaScorer& qa);

// Deterministic stubs for tests and diagnostics.
class OracleQaScorer : public QaScorer {
 public:
  Eigen::Vector4d score(const std::vector<std::string>&, const ClozeQuestion& q) const override;
};

class UniformQaScorer : public QaScorer {
 public:
  Eigen::Vector4d score(const std::vector<std::string>&, const ClozeQuestion&) const override;
};

class ScriptedQaScorer : public QaScorer {
 public:
  // Returns scripted vectors in call order per doc_id (cycling).
  explicit ScriptedQaScorer(std::map<std::string, std::vector<Eigen::Vector4d>> script)
      : script_(std::move(script)) {}
  Eigen::Vector4d score(const std::vector<std::string>&, const ClozeQuestion& q) const override;

 private:
  std::map<std::string, std::vector<Eigen::Vector4d>> script_;
  mutable std::map<std::string, size_t> cursor_;
};

struct QaTrainConfig {
  int embed_dim = 24;
  int hidden_dim = 24;
  int epochs = 12;
  double lr = 5e-3;
  double grad_clip = 5.0;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 7;
};

struct QaFitStats {
  double holdout_accuracy = 0.0;
  int train_count = 0;
  int holdout_count = 0;
};

// Default trainable scorer: bag-of-embeddings for context and candidate plus
// a recurrent encoding of the candidate-filled question, scored through a
// small feed-forward layer and a 4-way softmax.
class TrainableQaScorer : public QaScorer {
 public:
  explicit TrainableQaScorer(QaTrainConfig cfg = {});

  QaFitStats fit(const std::vector<ClozeQuestion>& bank,
                 const std::map<std::string, std::vector<std::string>>& contexts);

  Eigen::Vector4d score(const std::vector<std::string>& context,
                        const ClozeQuestion& q) const override;

  void save(const std::string& path) const;
  static std::unique_ptr<TrainableQaScorer> load(const std::string& path);

 private:
  QaTrainConfig cfg_;
  Vocabulary vocab_;
  nn::ParameterSet params_;
  bool built_ = false;

  void build_params(std::uint64_t seed);
  nn::Value candidate_logit(nn::Tape& t, const std::vector<int>& ctx_ids,
                            const std::vector<int>& filled_ids,
                            const std::vector<int>& cand_ids) const;
  std::array<nn::Value, 4> logits_for(nn::Tape& t, const std::vector<std::string>& context,
                                      const ClozeQuestion& q) const;
};

// Splits a pair answer "a, b" at the first ", "; single-part answers return
// the whole string as first and empty second.
std::pair<std::string, std::string> split_pair_answer(const std::string& cand);
// Question tokens with "___" blanks filled by the candidate (pair answers
// fill the two blanks in order).
std::vector<std::string> fill_blanks(const std::vector<std::string>& question_tokens,
                                     QuestionKind kind, const std::string& candidate);

}  // namespace kgsum::cloze
