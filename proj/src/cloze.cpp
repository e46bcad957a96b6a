#include "kgsum/cloze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "kgsum/checkpoint.hpp"
#include "kgsum/nn/optim.hpp"
#include "kgsum/rouge.hpp"

namespace kgsum::cloze {

namespace {

std::vector<std::string> sentence_tokens(const AnnotatedDocument& doc, int sent) {
  const auto& s = doc.sentences[sent];
  return {doc.tokens.begin() + s.start, doc.tokens.begin() + s.end};
}

std::vector<std::string> concat_sentences(const AnnotatedDocument& doc,
                                          const std::vector<int>& sents) {
  std::vector<std::string> out;
  for (int s : sents) {
    auto toks = sentence_tokens(doc, s);
    out.insert(out.end(), toks.begin(), toks.end());
  }
  return out;
}

}  // namespace

double sentence_set_rouge2_f1(const AnnotatedDocument& doc, const std::vector<int>& sentences) {
  std::map<std::pair<std::string, std::string>, long> cand, ref;
  long cand_total = 0, ref_total = 0;
  for (int s : sentences) {
    auto toks = lowercase_all(sentence_tokens(doc, s));
    for (size_t k = 0; k + 1 < toks.size(); ++k) {
      ++cand[{toks[k], toks[k + 1]}];
      ++cand_total;
    }
  }
  auto rtoks = lowercase_all(doc.reference_tokens);
  for (size_t k = 0; k + 1 < rtoks.size(); ++k) {
    ++ref[{rtoks[k], rtoks[k + 1]}];
    ++ref_total;
  }
  long overlap = 0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  if (cand_total == 0 || ref_total == 0 || overlap == 0) return 0.0;
  double p = static_cast<double>(overlap) / cand_total;
  double r = static_cast<double>(overlap) / ref_total;
  return 2.0 * p * r / (p + r);
}

std::vector<int> greedy_rouge2_selection(const AnnotatedDocument& doc) {
  std::vector<int> selected;
  std::set<int> chosen;
  double best_f1 = 0.0;
  int n = static_cast<int>(doc.sentences.size());
  while (true) {
    int best_sent = -1;
    double best_gain_f1 = best_f1;
    for (int s = 0; s < n; ++s) {
      if (chosen.count(s)) continue;
      std::vector<int> trial(chosen.begin(), chosen.end());
      trial.push_back(s);
      std::sort(trial.begin(), trial.end());
      double f1 = sentence_set_rouge2_f1(doc, trial);
      if (f1 > best_gain_f1) {
        best_gain_f1 = f1;
        best_sent = s;
      }
    }
    if (best_sent < 0) break;
    chosen.insert(best_sent);
    best_f1 = best_gain_f1;
  }
  selected.assign(chosen.begin(), chosen.end());
  return selected;
}

SalientContext select_salient_context(const AnnotatedDocument& doc) {
  std::set<int> chosen;
  for (int s : greedy_rouge2_selection(doc)) chosen.insert(s);

  // Reference sentences recovered from the sentence strings.
  std::vector<std::vector<std::string>> ref_sents;
  for (const auto& s : doc.reference_summary) ref_sents.push_back(split_words(s));

  for (int s = 0; s < static_cast<int>(doc.sentences.size()); ++s) {
    if (chosen.count(s)) continue;
    auto toks = sentence_tokens(doc, s);
    for (const auto& ref : ref_sents) {
      if (rouge::rouge_l(toks, ref).recall > 0.6) {
        chosen.insert(s);
        break;
      }
    }
  }

  SalientContext ctx;
  ctx.sentences.assign(chosen.begin(), chosen.end());
  ctx.text = concat_sentences(doc, ctx.sentences);
  return ctx;
}

std::string kind_to_string(QuestionKind k) {
  switch (k) {
    case QuestionKind::argument_pair: return "argument_pair";
    case QuestionKind::predicate: return "predicate";
    case QuestionKind::entity_pair: return "entity_pair";
  }
  return "?";
}

QuestionKind kind_from_string(const std::string& s) {
  if (s == "argument_pair") return QuestionKind::argument_pair;
  if (s == "predicate") return QuestionKind::predicate;
  if (s == "entity_pair") return QuestionKind::entity_pair;
  throw std::invalid_argument("unknown question kind: " + s);
}

std::pair<std::string, std::string> split_pair_answer(const std::string& cand) {
  size_t pos = cand.find(", ");
  if (pos == std::string::npos) return {cand, ""};
  return {cand.substr(0, pos), cand.substr(pos + 2)};
}

std::vector<std::string> fill_blanks(const std::vector<std::string>& question_tokens,
                                     QuestionKind kind, const std::string& candidate) {
  std::vector<std::string> fills;
  if (kind == QuestionKind::predicate) {
    fills.push_back(candidate);
  } else {
    auto [a, b] = split_pair_answer(candidate);
    fills.push_back(a);
    fills.push_back(b);
  }
  std::vector<std::string> out;
  size_t next = 0;
  for (const auto& tok : question_tokens) {
    if (tok == "___" && next < fills.size()) {
      for (const auto& w : split_words(fills[next])) out.push_back(w);
      ++next;
    } else {
      out.push_back(tok);
    }
  }
  return out;
}

void BigramFluencyScorer::fit(const std::vector<AnnotatedDocument>& docs) {
  auto feed = [&](const std::vector<std::string>& toks) {
    std::string prev = "<s>";
    for (const auto& t : toks) {
      std::string w = lowercase(t);
      ++unigrams_[w];
      ++bigrams_[prev + "\x1f" + w];
      prev = w;
    }
    ++unigrams_["<s>"];
  };
  for (const auto& d : docs) {
    feed(d.tokens);
    feed(d.reference_tokens);
  }
  vocab_size_ = static_cast<long>(unigrams_.size()) + 1;
}

double BigramFluencyScorer::perplexity(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) return std::exp(20.0);
  double log_sum = 0.0;
  std::string prev = "<s>";
  for (const auto& t : tokens) {
    std::string w = lowercase(t);
    auto uit = unigrams_.find(prev);
    long prev_count = uit == unigrams_.end() ? 0 : uit->second;
    auto bit = bigrams_.find(prev + "\x1f" + w);
    long big_count = bit == bigrams_.end() ? 0 : bit->second;
    double p = (big_count + alpha_) / (prev_count + alpha_ * vocab_size_);
    log_sum += std::log(p);
    prev = w;
  }
  return std::exp(-log_sum / static_cast<double>(tokens.size()));
}

namespace {

// Token boundaries of each reference sentence inside reference_tokens,
// recovered from the sentence strings.
std::vector<TokenSpan> reference_sentence_spans(const AnnotatedDocument& doc) {
  std::vector<TokenSpan> spans;
  int at = 0;
  int total = static_cast<int>(doc.reference_tokens.size());
  for (const auto& s : doc.reference_summary) {
    int len = static_cast<int>(split_words(s).size());
    TokenSpan span{at, std::min(at + len, total)};
    if (span.start < span.end) spans.push_back(span);
    at += len;
  }
  if (spans.empty() && total > 0) spans.push_back({0, total});
  return spans;
}

std::vector<std::string> blanked_sentence(const std::vector<std::string>& sent_tokens,
                                          std::vector<std::pair<int, int>> local_spans) {
  std::sort(local_spans.begin(), local_spans.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out = sent_tokens;
  for (const auto& [start, end] : local_spans) {
    if (start < 0 || end > static_cast<int>(out.size()) || start >= end) continue;
    out.erase(out.begin() + start, out.begin() + end);
    out.insert(out.begin() + start, "___");
  }
  return out;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

struct DistractorPool {
  // (candidate string, fill used for ranking) pairs in document order.
  std::vector<std::string> items;

  void add(const std::string& s) {
    std::string low = lowercase(s);
    for (const auto& e : items)
      if (lowercase(e) == low) return;
    items.push_back(s);
  }
};

// Candidates ranked by fluency of the filled question; ties lexicographic.
std::vector<std::string> rank_by_fluency(const std::vector<std::string>& cands,
                                         const std::vector<std::string>& question_tokens,
                                         QuestionKind kind, const FluencyScorer& fluency) {
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& c : cands)
    scored.push_back({fluency.perplexity(fill_blanks(question_tokens, kind, c)), c});
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& [ppl, c] : scored) out.push_back(c);
  return out;
}

class QuestionBuilder {
 public:
  QuestionBuilder(const AnnotatedDocument& doc, const SalientContext& ctx,
                  const FluencyScorer& fluency, const StopwordSet& stopwords, std::uint64_t seed)
      : doc_(doc), ctx_(ctx), fluency_(fluency), stopwords_(stopwords),
        rng_(seed ^ stable_hash(doc.doc_id)) {
    for (const auto& t : doc_.triples)
      if (std::find(ctx_.sentences.begin(), ctx_.sentences.end(), t.source_sentence) !=
          ctx_.sentences.end())
        context_triples_.push_back(&t);
  }

  QuestionBuild build() {
    QuestionBuild out;
    if (!doc_.reference_triples.empty()) {
      for (const auto& t : doc_.reference_triples) {
        if (split_words(t.subject.surface).size() > 5 || split_words(t.object.surface).size() > 5)
          continue;
        emit_argument_pair(t, out);
        emit_predicate(t, out);
      }
    } else {
      emit_entity_pairs(out);
    }
    return out;
  }

 private:
  const AnnotatedDocument& doc_;
  const SalientContext& ctx_;
  const FluencyScorer& fluency_;
  const StopwordSet& stopwords_;
  std::mt19937_64 rng_;
  std::vector<const Triple*> context_triples_;

  // Triple-level filter: drop context triples sharing any content word with
  // the correct answer.
  std::vector<const Triple*> eligible_triples(const std::vector<std::string>& answer_words) const {
    std::vector<const Triple*> out;
    for (const Triple* t : context_triples_) {
      std::vector<std::string> words;
      for (const auto* span : {&t->subject, &t->predicate, &t->object})
        for (const auto& w : split_words(span->surface)) words.push_back(w);
      if (!shares_content_word(words, answer_words, stopwords_)) out.push_back(t);
    }
    return out;
  }

  // Shortfall pool: arguments of triples from randomly chosen source
  // sentences.
  std::vector<std::string> random_arguments(bool subjects,
                                            const std::vector<std::string>& answer_words) {
    std::vector<int> order(doc_.sentences.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<std::string> out;
    for (int s : order) {
      for (const auto& t : doc_.triples) {
        if (t.source_sentence != s) continue;
        const MentionSpan& arg = subjects ? t.subject : t.object;
        if (shares_content_word(split_words(arg.surface), answer_words, stopwords_)) continue;
        out.push_back(arg.surface);
      }
    }
    return out;
  }

  void finish_question(QuestionKind kind, const std::vector<std::string>& question_tokens,
                       const std::string& correct, std::vector<std::string> distractors,
                       QuestionBuild& out) {
    ClozeQuestion q;
    q.kind = kind;
    q.doc_id = doc_.doc_id;
    q.question_text = join(question_tokens);
    std::vector<std::string> cands{correct};
    cands.insert(cands.end(), distractors.begin(), distractors.end());
    std::shuffle(cands.begin(), cands.end(), rng_);
    for (int i = 0; i < 4; ++i) {
      q.candidates[i] = cands[i];
      if (cands[i] == correct) q.correct_index = i;
    }
    out.questions.push_back(std::move(q));
  }

  // Assembles three distractors: the structured picks first (swap,
  // subject-replacement, object-replacement ranked by fluency), then the
  // remaining ranked pool, then random-sentence fallback.
  bool assemble_pair_distractors(const std::vector<std::string>& question_tokens,
                                 QuestionKind kind, const std::string& subj,
                                 const std::string& obj, const std::string& correct,
                                 std::vector<std::string>& distractors) {
    std::vector<std::string> answer_words = split_words(subj);
    for (const auto& w : split_words(obj)) answer_words.push_back(w);
    auto eligible = eligible_triples(answer_words);

    DistractorPool subj_pool, obj_pool;
    for (const Triple* t : eligible) {
      subj_pool.add(t->subject.surface + ", " + obj);
      obj_pool.add(subj + ", " + t->object.surface);
    }

    auto distinct = [&](const std::string& c) {
      if (lowercase(c) == lowercase(correct)) return false;
      for (const auto& d : distractors)
        if (lowercase(d) == lowercase(c)) return false;
      return true;
    };

    std::string swapped = obj + ", " + subj;
    if (distinct(swapped)) distractors.push_back(swapped);

    auto ranked_subj = rank_by_fluency(subj_pool.items, question_tokens, kind, fluency_);
    auto ranked_obj = rank_by_fluency(obj_pool.items, question_tokens, kind, fluency_);
    // One subject replacement and one object replacement when available.
    for (const auto& ranked : {ranked_subj, ranked_obj}) {
      if (distractors.size() >= 3) break;
      for (const auto& c : ranked) {
        if (distinct(c)) {
          distractors.push_back(c);
          break;
        }
      }
    }
    // Remaining ranked pool.
    std::vector<std::string> merged = ranked_subj;
    merged.insert(merged.end(), ranked_obj.begin(), ranked_obj.end());
    merged = rank_by_fluency(merged, question_tokens, kind, fluency_);
    for (const auto& c : merged) {
      if (distractors.size() >= 3) break;
      if (distinct(c)) distractors.push_back(c);
    }
    // Random-sentence fallback.
    if (distractors.size() < 3) {
      for (bool subjects : {true, false}) {
        for (const auto& arg : random_arguments(subjects, answer_words)) {
          if (distractors.size() >= 3) break;
          std::string c = subjects ? arg + ", " + obj : subj + ", " + arg;
          if (distinct(c)) distractors.push_back(c);
        }
      }
    }
    return distractors.size() >= 3;
  }

  void emit_argument_pair(const Triple& t, QuestionBuild& out) {
    auto spans = reference_sentence_spans(doc_);
    int sent = t.source_sentence >= 0 && t.source_sentence < static_cast<int>(spans.size())
                   ? t.source_sentence
                   : 0;
    TokenSpan span = spans[sent];
    std::vector<std::string> sent_tokens(doc_.reference_tokens.begin() + span.start,
                                         doc_.reference_tokens.begin() + span.end);
    auto question_tokens = blanked_sentence(
        sent_tokens, {{t.subject.start - span.start, t.subject.end - span.start},
                      {t.object.start - span.start, t.object.end - span.start}});

    std::string correct = t.subject.surface + ", " + t.object.surface;
    std::vector<std::string> distractors;
    if (!assemble_pair_distractors(question_tokens, QuestionKind::argument_pair,
                                   t.subject.surface, t.object.surface, correct, distractors)) {
      out.diagnostics.push_back(
          {doc_.doc_id, "argument_pair question dropped: fewer than 3 distractors for \"" +
                            correct + "\""});
      return;
    }
    finish_question(QuestionKind::argument_pair, question_tokens, correct, std::move(distractors),
                    out);
  }

  void emit_predicate(const Triple& t, QuestionBuild& out) {
    auto spans = reference_sentence_spans(doc_);
    int sent = t.source_sentence >= 0 && t.source_sentence < static_cast<int>(spans.size())
                   ? t.source_sentence
                   : 0;
    TokenSpan span = spans[sent];
    std::vector<std::string> sent_tokens(doc_.reference_tokens.begin() + span.start,
                                         doc_.reference_tokens.begin() + span.end);
    auto question_tokens = blanked_sentence(
        sent_tokens, {{t.predicate.start - span.start, t.predicate.end - span.start}});

    std::string correct = t.predicate.surface;
    auto answer_words = split_words(correct);
    DistractorPool pool;
    for (const Triple* ct : eligible_triples(answer_words)) {
      if (lowercase(ct->predicate.surface) == lowercase(correct)) continue;
      pool.add(ct->predicate.surface);
    }
    auto ranked = rank_by_fluency(pool.items, question_tokens, QuestionKind::predicate, fluency_);
    std::vector<std::string> distractors;
    for (const auto& c : ranked) {
      if (distractors.size() >= 3) break;
      distractors.push_back(c);
    }
    if (distractors.size() < 3) {
      // Fallback: predicates from randomly chosen sentences.
      std::vector<int> order(doc_.sentences.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::shuffle(order.begin(), order.end(), rng_);
      for (int s : order) {
        if (distractors.size() >= 3) break;
        for (const auto& dt : doc_.triples) {
          if (dt.source_sentence != s) continue;
          if (shares_content_word(split_words(dt.predicate.surface), answer_words, stopwords_))
            continue;
          std::string c = dt.predicate.surface;
          bool dup = lowercase(c) == lowercase(correct);
          for (const auto& d : distractors)
            if (lowercase(d) == lowercase(c)) dup = true;
          if (!dup) distractors.push_back(c);
          if (distractors.size() >= 3) break;
        }
      }
    }
    if (distractors.size() < 3) {
      out.diagnostics.push_back(
          {doc_.doc_id,
           "predicate question dropped: fewer than 3 distractors for \"" + correct + "\""});
      return;
    }
    finish_question(QuestionKind::predicate, question_tokens, correct, std::move(distractors),
                    out);
  }

  void emit_entity_pairs(QuestionBuild& out) {
    // Entity surfaces from the coreference chains, longest first so nested
    // matches prefer the full mention.
    std::vector<std::vector<std::string>> entity_words;
    std::set<std::string> seen;
    for (const auto& chain : doc_.coref_chains) {
      for (const auto& m : chain) {
        std::string low = lowercase(m.surface);
        if (seen.count(low)) continue;
        seen.insert(low);
        entity_words.push_back(split_words(m.surface));
      }
    }
    std::stable_sort(entity_words.begin(), entity_words.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });

    auto spans = reference_sentence_spans(doc_);
    for (const auto& span : spans) {
      std::vector<std::string> sent_tokens(doc_.reference_tokens.begin() + span.start,
                                           doc_.reference_tokens.begin() + span.end);
      // First two non-overlapping entity occurrences in the sentence.
      std::vector<std::pair<int, int>> found;
      std::vector<bool> used(sent_tokens.size(), false);
      auto lower_sent = lowercase_all(sent_tokens);
      for (int pos = 0; pos < static_cast<int>(lower_sent.size()) && found.size() < 2; ++pos) {
        for (const auto& ent : entity_words) {
          if (ent.empty() || pos + ent.size() > lower_sent.size()) continue;
          bool match = true;
          for (size_t k = 0; k < ent.size(); ++k)
            if (used[pos + k] || lower_sent[pos + k] != lowercase(ent[k])) {
              match = false;
              break;
            }
          if (match) {
            for (size_t k = 0; k < ent.size(); ++k) used[pos + k] = true;
            found.push_back({pos, pos + static_cast<int>(ent.size())});
            break;
          }
        }
      }
      if (found.size() < 2) continue;

      std::string first = join({sent_tokens.begin() + found[0].first,
                                sent_tokens.begin() + found[0].second});
      std::string second = join({sent_tokens.begin() + found[1].first,
                                 sent_tokens.begin() + found[1].second});
      auto question_tokens = blanked_sentence(sent_tokens, {found[0], found[1]});
      std::string correct = first + ", " + second;
      std::vector<std::string> distractors;
      if (!assemble_pair_distractors(question_tokens, QuestionKind::entity_pair, first, second,
                                     correct, distractors)) {
        out.diagnostics.push_back(
            {doc_.doc_id,
             "entity_pair question dropped: fewer than 3 distractors for \"" + correct + "\""});
        continue;
      }
      finish_question(QuestionKind::entity_pair, question_tokens, correct, std::move(distractors),
                      out);
    }
  }
};

}  // namespace

QuestionBuild build_questions(const AnnotatedDocument& doc, const SalientContext& ctx,
                              const FluencyScorer& fluency, const StopwordSet& stopwords,
                              std::uint64_t seed) {
  QuestionBuilder builder(doc, ctx, fluency, stopwords, seed);
  return builder.build();
}

std::string question_to_json(const ClozeQuestion& q) {
  nlohmann::ordered_json j;
  j["doc_id"] = q.doc_id;
  j["kind"] = kind_to_string(q.kind);
  j["question_text"] = q.question_text;
  j["candidates"] = q.candidates;
  j["correct_index"] = q.correct_index;
  return j.dump();
}

ClozeQuestion question_from_json(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  ClozeQuestion q;
  q.doc_id = j.at("doc_id").get<std::string>();
  q.kind = kind_from_string(j.at("kind").get<std::string>());
  q.question_text = j.at("question_text").get<std::string>();
  auto cands = j.at("candidates");
  if (cands.size() != 4) throw std::runtime_error("question needs exactly 4 candidates");
  for (int i = 0; i < 4; ++i) q.candidates[i] = cands[i].get<std::string>();
  q.correct_index = j.at("correct_index").get<int>();
  return q;
}

double cloze_reward(const std::vector<std::string>& summary_tokens,
                    const std::vector<ClozeQuestion>& questions, const QaScorer& qa) {
  if (questions.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& q : questions) sum += qa.score(summary_tokens, q)(q.correct_index);
  return sum / static_cast<double>(questions.size());
}

ClozeEval cloze_evaluate(const std::map<std::string, std::vector<std::string>>& summaries,
                         const std::map<std::string, std::vector<ClozeQuestion>>& banks,
                         const QaScorer& qa) {
  ClozeEval eval;
  for (const auto& [doc_id, summary] : summaries) {
    auto bit = banks.find(doc_id);
    if (bit == banks.end() || bit->second.empty()) continue;
    SummaryClozeScore s;
    s.doc_id = doc_id;
    s.num_questions = static_cast<int>(bit->second.size());
    int correct = 0;
    for (const auto& q : bit->second) {
      Eigen::Vector4d p = qa.score(summary, q);
      s.mean_probability += p(q.correct_index);
      int argmax = 0;
      for (int i = 1; i < 4; ++i)
        if (p(i) > p(argmax)) argmax = i;
      if (argmax == q.correct_index) ++correct;
    }
    s.mean_probability /= s.num_questions;
    s.accuracy = static_cast<double>(correct) / s.num_questions;
    eval.per_summary.push_back(s);
  }
  for (const auto& s : eval.per_summary) {
    eval.mean_probability += s.mean_probability;
    eval.accuracy += s.accuracy;
  }
  if (!eval.per_summary.empty()) {
    eval.mean_probability /= eval.per_summary.size();
    eval.accuracy /= eval.per_summary.size();
  }
  return eval;
}

Eigen::Vector4d OracleQaScorer::score(const std::vector<std::string>&,
                                      const ClozeQuestion& q) const {
  Eigen::Vector4d p = Eigen::Vector4d::Zero();
  p(q.correct_index) = 1.0;
  return p;
}

Eigen::Vector4d UniformQaScorer::score(const std::vector<std::string>&,
                                       const ClozeQuestion&) const {
  return Eigen::Vector4d::Constant(0.25);
}

Eigen::Vector4d ScriptedQaScorer::score(const std::vector<std::string>&,
                                        const ClozeQuestion& q) const {
  auto it = script_.find(q.doc_id);
  if (it == script_.end() || it->second.empty())
    throw std::logic_error("no script for doc " + q.doc_id);
  size_t& cur = cursor_[q.doc_id];
  Eigen::Vector4d p = it->second[cur % it->second.size()];
  ++cur;
  return p;
}

// --- trainable scorer ---

TrainableQaScorer::TrainableQaScorer(QaTrainConfig cfg) : cfg_(cfg) {}

void TrainableQaScorer::build_params(std::uint64_t seed) {
  int e = cfg_.embed_dim, h = cfg_.hidden_dim;
  params_.create("qa.embed", vocab_.size(), e);
  params_.create("qa.lstm.wx", 4 * h, e);
  params_.create("qa.lstm.wh", 4 * h, h);
  params_.create("qa.lstm.b", 4 * h, 1);
  params_.create("qa.ff", h, 3 * e + h);
  params_.create("qa.probe", 1, h);
  params_.init_uniform(seed);
  // Zero readout: an unfitted scorer emits the uniform distribution.
  params_.at("qa.probe").value.setZero();
  built_ = true;
}

nn::Value TrainableQaScorer::candidate_logit(nn::Tape& t, const std::vector<int>& ctx_ids,
                                             const std::vector<int>& filled_ids,
                                             const std::vector<int>& cand_ids) const {
  auto& self = const_cast<TrainableQaScorer&>(*this);
  int h = cfg_.hidden_dim;
  auto bag = [&](const std::vector<int>& ids) {
    nn::Value em = t.rows_as_cols(self.params_.at("qa.embed"), ids);
    return t.matmul(em, t.constant(nn::Matrix::Constant(ids.size(), 1, 1.0 / ids.size())));
  };
  std::vector<int> ctx = ctx_ids.empty() ? std::vector<int>{Vocabulary::kUnk} : ctx_ids;
  std::vector<int> cand = cand_ids.empty() ? std::vector<int>{Vocabulary::kUnk} : cand_ids;
  std::vector<int> filled = filled_ids.empty() ? std::vector<int>{Vocabulary::kUnk} : filled_ids;

  nn::Value ctx_bag = bag(ctx);
  nn::Value cand_bag = bag(cand);

  nn::Value wx = t.param(self.params_.at("qa.lstm.wx"));
  nn::Value wh = t.param(self.params_.at("qa.lstm.wh"));
  nn::Value b = t.param(self.params_.at("qa.lstm.b"));
  nn::Value inputs = t.rows_as_cols(self.params_.at("qa.embed"), filled);
  nn::Value hs = t.zeros(h, 1), cs = t.zeros(h, 1);
  for (size_t k = 0; k < filled.size(); ++k) {
    nn::Value z = t.add(t.add(t.matmul(wx, t.col(inputs, static_cast<int>(k))), t.matmul(wh, hs)), b);
    nn::Value i = t.sigmoid_(t.rows_range(z, 0, h));
    nn::Value f = t.sigmoid_(t.rows_range(z, h, 2 * h));
    nn::Value g = t.tanh_(t.rows_range(z, 2 * h, 3 * h));
    nn::Value o = t.sigmoid_(t.rows_range(z, 3 * h, 4 * h));
    cs = t.add(t.cmul(f, cs), t.cmul(i, g));
    hs = t.cmul(o, t.tanh_(cs));
  }

  nn::Value feats =
      t.concat_rows({ctx_bag, hs, cand_bag, t.cmul(ctx_bag, cand_bag)});
  nn::Value hidden = t.tanh_(t.matmul(t.param(self.params_.at("qa.ff")), feats));
  return t.matmul(t.param(self.params_.at("qa.probe")), hidden);
}

std::array<nn::Value, 4> TrainableQaScorer::logits_for(nn::Tape& t,
                                                       const std::vector<std::string>& context,
                                                       const ClozeQuestion& q) const {
  auto ctx_ids = vocab_.ids(lowercase_all(context));
  auto qtoks = split_words(q.question_text);
  std::array<nn::Value, 4> logits;
  for (int c = 0; c < 4; ++c) {
    auto filled = vocab_.ids(lowercase_all(fill_blanks(qtoks, q.kind, q.candidates[c])));
    auto cand_ids = vocab_.ids(lowercase_all(split_words(q.candidates[c])));
    logits[c] = candidate_logit(t, ctx_ids, filled, cand_ids);
  }
  return logits;
}

Eigen::Vector4d TrainableQaScorer::score(const std::vector<std::string>& context,
                                         const ClozeQuestion& q) const {
  if (!built_) throw std::logic_error("TrainableQaScorer used before fit() or load()");
  nn::Tape t;
  auto logits = logits_for(t, context, q);
  nn::Value stacked = t.concat_rows({logits[0], logits[1], logits[2], logits[3]});
  nn::Value probs = t.softmax(stacked);
  Eigen::Vector4d out;
  for (int i = 0; i < 4; ++i) out(i) = t.val(probs)(i, 0);
  return out;
}

QaFitStats TrainableQaScorer::fit(const std::vector<ClozeQuestion>& bank,
                                  const std::map<std::string, std::vector<std::string>>& contexts) {
  // Vocabulary over everything the scorer will read.
  std::vector<std::string> all_tokens;
  for (const auto& [doc_id, ctx] : contexts)
    for (const auto& w : ctx) all_tokens.push_back(lowercase(w));
  for (const auto& q : bank) {
    for (const auto& w : split_words(q.question_text)) all_tokens.push_back(lowercase(w));
    for (const auto& c : q.candidates)
      for (const auto& w : split_words(c)) all_tokens.push_back(lowercase(w));
  }
  vocab_ = Vocabulary::from_tokens(all_tokens);
  params_ = nn::ParameterSet();
  build_params(cfg_.seed);

  std::vector<const ClozeQuestion*> items;
  for (const auto& q : bank) {
    if (contexts.count(q.doc_id)) items.push_back(&q);
  }
  std::mt19937_64 rng(cfg_.seed);
  std::shuffle(items.begin(), items.end(), rng);
  int holdout = static_cast<int>(items.size() * cfg_.holdout_fraction);
  std::vector<const ClozeQuestion*> held(items.end() - holdout, items.end());
  items.resize(items.size() - holdout);

  QaFitStats stats;
  stats.train_count = static_cast<int>(items.size());
  stats.holdout_count = holdout;

  nn::Adam opt({cfg_.lr});
  auto plist = params_.all();
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(items.begin(), items.end(), rng);
    for (const ClozeQuestion* q : items) {
      const auto& ctx = contexts.at(q->doc_id);
      nn::Tape t;
      auto logits = logits_for(t, ctx, *q);
      nn::Value stacked = t.concat_rows({logits[0], logits[1], logits[2], logits[3]});
      nn::Value probs = t.softmax(stacked);
      nn::Value loss = t.scale(t.log_(t.pick(probs, q->correct_index, 0)), -1.0);
      params_.zero_grads();
      t.backward(loss);
      nn::clip_global_norm(plist, cfg_.grad_clip);
      opt.step(plist);
    }
  }

  int correct = 0;
  for (const ClozeQuestion* q : held) {
    Eigen::Vector4d p = score(contexts.at(q->doc_id), *q);
    int argmax = 0;
    for (int i = 1; i < 4; ++i)
      if (p(i) > p(argmax)) argmax = i;
    if (argmax == q->correct_index) ++correct;
  }
  stats.holdout_accuracy = holdout > 0 ? static_cast<double>(correct) / holdout : 0.0;
  return stats;
}

void TrainableQaScorer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write qa scorer: " + path);
  out << "KGSUMQA1\n";
  out << cfg_.embed_dim << " " << cfg_.hidden_dim << " " << vocab_.size() << "\n";
  for (int i = 0; i < vocab_.size(); ++i) out << vocab_.token(i) << "\n";
  write_parameter_block(out, params_);
}

std::unique_ptr<TrainableQaScorer> TrainableQaScorer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read qa scorer: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "KGSUMQA1") throw std::runtime_error("not a qa scorer file: " + path);
  QaTrainConfig cfg;
  int vocab_count = 0;
  in >> cfg.embed_dim >> cfg.hidden_dim >> vocab_count;
  in.ignore(1);
  std::vector<std::string> tokens;
  for (int i = 0; i < vocab_count; ++i) {
    std::string line;
    std::getline(in, line);
    tokens.push_back(line);
  }
  auto scorer = std::make_unique<TrainableQaScorer>(cfg);
  // Rebuild the identical vocabulary (reserved symbols come first in file).
  scorer->vocab_ = Vocabulary::from_tokens({tokens.begin() + 3, tokens.end()});
  scorer->build_params(cfg.seed);
  read_parameter_block(in, scorer->params_);
  return scorer;
}

}  // namespace kgsum::cloze
