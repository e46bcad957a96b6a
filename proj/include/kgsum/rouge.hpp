#pragma once

#include <string>
#include <vector>

namespace kgsum::rouge {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Clipped n-gram overlap (n = 1 or 2). Tokens are lowercased internally;
// no stemming or stopword removal. Empty inputs score zero.
RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);

// Longest common subsequence over the full token sequences.
RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

// gamma1*R1 + gamma2*R2 + (1-gamma1-gamma2)*RL, all F1. Throws on invalid
// weights (negative, or gamma1+gamma2 > 1).
double rouge_reward(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference, double gamma1, double gamma2);

}  // namespace kgsum::rouge
