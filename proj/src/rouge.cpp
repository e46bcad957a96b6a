#include "kgsum/rouge.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "kgsum/text.hpp"

namespace kgsum::rouge {

namespace {

RougeScore from_counts(long overlap, long cand_total, long ref_total) {
  RougeScore s;
  if (cand_total > 0) s.precision = static_cast<double>(overlap) / cand_total;
  if (ref_total > 0) s.recall = static_cast<double>(overlap) / ref_total;
  if (s.precision + s.recall > 0.0)
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

std::map<std::vector<std::string>, long> ngram_counts(const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, long> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("rouge_n supports n = 1 or 2");
  auto cand = lowercase_all(candidate);
  auto ref = lowercase_all(reference);
  auto cand_counts = ngram_counts(cand, n);
  auto ref_counts = ngram_counts(ref, n);

  long overlap = 0, cand_total = 0, ref_total = 0;
  for (const auto& [g, c] : cand_counts) {
    cand_total += c;
    auto it = ref_counts.find(g);
    if (it != ref_counts.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [g, c] : ref_counts) ref_total += c;
  return from_counts(overlap, cand_total, ref_total);
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
  auto cand = lowercase_all(candidate);
  auto ref = lowercase_all(reference);
  size_t n = cand.size(), m = ref.size();
  if (n == 0 || m == 0) return {};

  // Two-row LCS DP.
  std::vector<long> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (cand[i - 1] == ref[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return from_counts(prev[m], static_cast<long>(n), static_cast<long>(m));
}

double rouge_reward(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference, double gamma1, double gamma2) {
  if (gamma1 < 0.0 || gamma2 < 0.0 || gamma1 + gamma2 > 1.0)
    throw std::invalid_argument("rouge_reward: need gamma1, gamma2 >= 0 and gamma1 + gamma2 <= 1");
  double r1 = rouge_n(candidate, reference, 1).f1;
  double r2 = rouge_n(candidate, reference, 2).f1;
  double rl = rouge_l(candidate, reference).f1;
  return gamma1 * r1 + gamma2 * r2 + (1.0 - gamma1 - gamma2) * rl;
}

}  // namespace kgsum::rouge
