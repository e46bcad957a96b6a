#include <random>

#include "doctest.h"
#include "kgsum/rouge.hpp"
#include "kgsum/text.hpp"
#include "rouge_fixtures.hpp"

using namespace kgsum;
using namespace kgsum::rouge;

TEST_CASE("hand-computed fixture table") {
  for (const auto& f : testsupport::rouge_fixtures()) {
    CAPTURE(f.name);
    auto c = split_words(f.candidate), r = split_words(f.reference);
    auto s1 = rouge_n(c, r, 1);
    auto s2 = rouge_n(c, r, 2);
    auto sl = rouge_l(c, r);
    CHECK(s1.precision == doctest::Approx(f.r1_p).epsilon(1e-12));
    CHECK(s1.recall == doctest::Approx(f.r1_r).epsilon(1e-12));
    CHECK(s1.f1 == doctest::Approx(f.r1_f).epsilon(1e-12));
    CHECK(s2.precision == doctest::Approx(f.r2_p).epsilon(1e-12));
    CHECK(s2.recall == doctest::Approx(f.r2_r).epsilon(1e-12));
    CHECK(s2.f1 == doctest::Approx(f.r2_f).epsilon(1e-12));
    CHECK(sl.precision == doctest::Approx(f.rl_p).epsilon(1e-12));
    CHECK(sl.recall == doctest::Approx(f.rl_r).epsilon(1e-12));
    CHECK(sl.f1 == doctest::Approx(f.rl_f).epsilon(1e-12));
  }
}

TEST_CASE("rouge_reward mixes F1 scores with the configured weights") {
  auto c = split_words("the cat sat");
  auto r = split_words("the cat ran");
  double r1 = rouge_n(c, r, 1).f1, r2 = rouge_n(c, r, 2).f1, rl = rouge_l(c, r).f1;

  CHECK(rouge_reward(c, r, 0.0, 0.75) == doctest::Approx(0.75 * r2 + 0.25 * rl));
  CHECK(rouge_reward(c, r, 0.33, 0.33) ==
        doctest::Approx(0.33 * r1 + 0.33 * r2 + 0.34 * rl));
  CHECK(rouge_reward(r, r, 0.2, 0.5) == doctest::Approx(1.0));
  CHECK_THROWS(rouge_reward(c, r, 0.8, 0.4));
  CHECK_THROWS(rouge_reward(c, r, -0.1, 0.4));
}

TEST_CASE("score bounds and permutation behaviour") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> c, r;
    for (size_t i = 0; i < 1 + rng() % 8; ++i) c.push_back(pool[rng() % pool.size()]);
    for (size_t i = 0; i < 1 + rng() % 8; ++i) r.push_back(pool[rng() % pool.size()]);
    for (auto s : {rouge_n(c, r, 1), rouge_n(c, r, 2), rouge_l(c, r)}) {
      CHECK(s.precision >= 0.0);
      CHECK(s.precision <= 1.0);
      CHECK(s.recall >= 0.0);
      CHECK(s.recall <= 1.0);
      CHECK(s.f1 <= std::max(s.precision, s.recall) + 1e-12);
    }
    // ROUGE-1 is invariant to candidate order.
    auto shuffled = c;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(rouge_n(shuffled, r, 1).f1 == doctest::Approx(rouge_n(c, r, 1).f1));
  }
  // ROUGE-2 and ROUGE-L are order sensitive.
  auto c1 = split_words("a b c d");
  auto c2 = split_words("d c b a");
  auto ref = split_words("a b c d");
  CHECK(rouge_n(c1, ref, 2).f1 != rouge_n(c2, ref, 2).f1);
  CHECK(rouge_l(c1, ref).f1 != rouge_l(c2, ref).f1);
}

TEST_CASE("appending a reference token never decreases ROUGE-1 recall") {
  std::mt19937_64 rng(13);
  const std::vector<std::string> pool = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> c, r;
    for (size_t i = 0; i < 1 + rng() % 6; ++i) c.push_back(pool[rng() % pool.size()]);
    for (size_t i = 0; i < 1 + rng() % 6; ++i) r.push_back(pool[rng() % pool.size()]);
    double before = rouge_n(c, r, 1).recall;
    c.push_back(r[rng() % r.size()]);
    CHECK(rouge_n(c, r, 1).recall >= before - 1e-12);
  }
}
