#include "kgsum/corpus.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kgsum {

using nlohmann::json;

std::string join_tokens(const std::vector<std::string>& tokens, int start, int end) {
  std::string out;
  for (int i = start; i < end; ++i) {
    if (i > start) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {

std::string span_str(int start, int end) {
  return "(" + std::to_string(start) + "," + std::to_string(end) + ")";
}

bool span_in_range(const MentionSpan& s, int n) {
  return s.start >= 0 && s.start < s.end && s.end <= n;
}

MentionSpan parse_span(const json& j, const std::vector<std::string>& tokens) {
  MentionSpan s;
  s.start = j.at("start").get<int>();
  s.end = j.at("end").get<int>();
  if (s.start >= 0 && s.end <= static_cast<int>(tokens.size()) && s.start < s.end)
    s.surface = join_tokens(tokens, s.start, s.end);
  return s;
}

void check_spans(const AnnotatedDocument& doc, const std::vector<MentionSpan>& spans,
                 const char* what, std::vector<Diagnostic>& out) {
  int n = static_cast<int>(doc.tokens.size());
  for (const auto& s : spans) {
    if (s.start >= s.end)
      out.push_back({doc.doc_id, std::string(what) + " span " + span_str(s.start, s.end) + " is empty"});
    else if (s.start < 0 || s.end > n)
      out.push_back({doc.doc_id, std::string(what) + " span " + span_str(s.start, s.end) + " outside token range"});
    else if (s.surface != join_tokens(doc.tokens, s.start, s.end))
      out.push_back({doc.doc_id, std::string(what) + " span " + span_str(s.start, s.end) +
                                     " surface does not equal joined tokens"});
  }
}

}  // namespace

std::vector<Diagnostic> validate_document(const AnnotatedDocument& doc) {
  std::vector<Diagnostic> out;
  int n = static_cast<int>(doc.tokens.size());

  // Paragraphs: disjoint, sorted, prefix-contiguous over the tokens.
  int expected_start = 0;
  for (size_t i = 0; i < doc.paragraphs.size(); ++i) {
    const auto& p = doc.paragraphs[i];
    if (p.start >= p.end) {
      out.push_back({doc.doc_id, "paragraph span " + span_str(p.start, p.end) + " is empty"});
      continue;
    }
    if (p.end > n)
      out.push_back({doc.doc_id, "paragraph span " + span_str(p.start, p.end) + " outside token range"});
    if (p.start < expected_start)
      out.push_back({doc.doc_id, "paragraph span " + span_str(p.start, p.end) +
                                     " overlaps the previous paragraph"});
    else if (p.start > expected_start)
      out.push_back({doc.doc_id, "paragraph span " + span_str(p.start, p.end) +
                                     " leaves a gap; paragraphs must cover a contiguous prefix"});
    expected_start = p.end;
  }

  for (const auto& s : doc.sentences) {
    if (s.start >= s.end)
      out.push_back({doc.doc_id, "sentence span " + span_str(s.start, s.end) + " is empty"});
    else if (s.start < 0 || s.end > n)
      out.push_back({doc.doc_id, "sentence span " + span_str(s.start, s.end) + " outside token range"});
  }

  int num_sents = static_cast<int>(doc.sentences.size());
  for (const auto& t : doc.triples) {
    check_spans(doc, {t.subject, t.predicate, t.object}, "triple", out);
    if (t.subject == t.predicate || t.subject == t.object || t.predicate == t.object)
      out.push_back({doc.doc_id, "triple at sentence " + std::to_string(t.source_sentence) +
                                     " has identical argument spans"});
    if (t.source_sentence < 0 || t.source_sentence >= num_sents)
      out.push_back({doc.doc_id, "triple references missing sentence " +
                                     std::to_string(t.source_sentence)});
  }

  for (const auto& chain : doc.coref_chains) check_spans(doc, chain, "coref mention", out);

  int ref_n = static_cast<int>(doc.reference_tokens.size());
  int ref_sents = static_cast<int>(doc.reference_summary.size());
  for (const auto& t : doc.reference_triples) {
    for (const auto* s : {&t.subject, &t.predicate, &t.object}) {
      if (!span_in_range(*s, ref_n))
        out.push_back({doc.doc_id, "reference triple span " + span_str(s->start, s->end) +
                                       " outside reference token range"});
    }
    if (t.source_sentence < 0 || t.source_sentence >= ref_sents)
      out.push_back({doc.doc_id, "reference triple references missing reference sentence " +
                                     std::to_string(t.source_sentence)});
  }

  return out;
}

AnnotatedDocument truncate_document(const AnnotatedDocument& doc, int truncate_len) {
  AnnotatedDocument out;
  out.doc_id = doc.doc_id;
  int keep = std::min<int>(truncate_len, static_cast<int>(doc.tokens.size()));
  out.tokens.assign(doc.tokens.begin(), doc.tokens.begin() + keep);

  auto clip = [&](const TokenSpan& s) { return TokenSpan{s.start, std::min(s.end, keep)}; };
  for (const auto& p : doc.paragraphs) {
    TokenSpan c = clip(p);
    if (c.start < c.end) out.paragraphs.push_back(c);
  }
  for (const auto& s : doc.sentences) {
    TokenSpan c = clip(s);
    if (c.start < c.end) out.sentences.push_back(c);
  }
  for (const auto& t : doc.triples) {
    if (t.subject.end <= keep && t.predicate.end <= keep && t.object.end <= keep)
      out.triples.push_back(t);
  }
  // Chains crossing the boundary are clipped to their in-range mentions.
  for (const auto& chain : doc.coref_chains) {
    std::vector<MentionSpan> kept;
    for (const auto& m : chain)
      if (m.end <= keep) kept.push_back(m);
    if (!kept.empty()) out.coref_chains.push_back(std::move(kept));
  }
  out.reference_summary = doc.reference_summary;
  out.reference_tokens = doc.reference_tokens;
  out.reference_triples = doc.reference_triples;
  return out;
}

AnnotatedDocument parse_record(const std::string& line) {
  json j = json::parse(line);
  AnnotatedDocument doc;
  doc.doc_id = j.at("doc_id").get<std::string>();
  doc.tokens = j.at("tokens").get<std::vector<std::string>>();

  for (const auto& p : j.at("paragraphs"))
    doc.paragraphs.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  for (const auto& s : j.at("sentences"))
    doc.sentences.push_back({s.at(0).get<int>(), s.at(1).get<int>()});

  for (const auto& t : j.at("triples")) {
    Triple tr;
    tr.subject = parse_span(t.at("subject"), doc.tokens);
    tr.predicate = parse_span(t.at("predicate"), doc.tokens);
    tr.object = parse_span(t.at("object"), doc.tokens);
    tr.source_sentence = t.at("sentence").get<int>();
    doc.triples.push_back(tr);
  }
  for (const auto& chain : j.at("coref_chains")) {
    std::vector<MentionSpan> c;
    for (const auto& m : chain) c.push_back(parse_span(m, doc.tokens));
    doc.coref_chains.push_back(std::move(c));
  }
  doc.reference_summary = j.at("reference_summary").get<std::vector<std::string>>();
  doc.reference_tokens = j.at("reference_tokens").get<std::vector<std::string>>();
  if (j.contains("reference_triples")) {
    for (const auto& t : j.at("reference_triples")) {
      Triple tr;
      tr.subject = parse_span(t.at("subject"), doc.reference_tokens);
      tr.predicate = parse_span(t.at("predicate"), doc.reference_tokens);
      tr.object = parse_span(t.at("object"), doc.reference_tokens);
      tr.source_sentence = t.at("sentence").get<int>();
      doc.reference_triples.push_back(tr);
    }
  }
  return doc;
}

LoadResult load_corpus(const std::string& path, int truncate_len) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  if (truncate_len <= 0) throw std::runtime_error("truncate_len must be positive");

  LoadResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    AnnotatedDocument doc;
    try {
      doc = parse_record(line);
    } catch (const std::exception& e) {
      result.diagnostics.push_back(
          {"", "line " + std::to_string(line_no) + ": malformed record: " + e.what()});
      continue;
    }
    auto issues = validate_document(doc);
    if (!issues.empty()) {
      for (auto& d : issues)
        result.diagnostics.push_back({doc.doc_id, "line " + std::to_string(line_no) + ": " + d.message});
      continue;
    }
    result.documents.push_back(truncate_document(doc, truncate_len));
  }
  return result;
}

}  // namespace kgsum
