#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "test_util.hpp"
#include "warp/diagnostics.hpp"

using namespace warp;
using warp::testing::random_policy;
using warp::testing::small_arch;

TEST_CASE("bigram jaccard", "[diagnostics]") {
  using V = std::vector<int>;
  CHECK(bigram_jaccard(V{1, 2, 3}, V{1, 2, 3}) == 1.0);
  CHECK(bigram_jaccard(V{1, 2, 3}, V{4, 5, 6}) == 0.0);
  CHECK(bigram_jaccard(V{1, 2, 3}, V{1, 2, 4}) == Catch::Approx(1.0 / 3.0));
  CHECK(bigram_jaccard(V{1, 2, 4}, V{1, 2, 3}) == bigram_jaccard(V{1, 2, 3}, V{1, 2, 4}));
  CHECK(bigram_jaccard(V{1, 2, 1, 2}, V{1, 2}) == Catch::Approx(0.5));
  CHECK(bigram_jaccard(V{0}, V{0}) == 1.0);
  CHECK(bigram_jaccard(V{0}, V{3}) == 0.0);
}

TEST_CASE("greedy decoding has similarity one", "[diagnostics]") {
  const auto a = small_arch();
  const auto w = random_policy(a, 3);
  DiversityConfig dc;
  dc.greedy = true;
  const auto rows = diversity_probe({{"w", w}}, w, make_prompts(a, 6, 1), dc, {2, 1});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].similarity.mean == 1.0);
  CHECK(rows[0].kl.mean == 0.0);
  dc.greedy = false;
  dc.temperature = 1.0;
  const auto sampled = diversity_probe({{"w", w}}, w, make_prompts(a, 6, 1), dc, {2, 1});
  CHECK(sampled[0].similarity.mean < 1.0);
}

TEST_CASE("histogram bins and overflow", "[diagnostics]") {
  const std::vector<double> xs{-2, -1, -0.5, 0, 0.49, 1, 3};
  const auto h = histogram(xs, -1, 1, 4);
  CHECK(h.below == 1);
  CHECK(h.above == 1);
  CHECK(h.counts == std::vector<long>{1, 1, 2, 1});
  CHECK_THROWS_AS(histogram(xs, 1, 1), Error);
}

TEST_CASE("merge comparison covers every method and lambda", "[diagnostics]") {
  const auto a = small_arch();
  const auto init = random_policy(a, 1, 0.2);
  const auto t1 = random_policy(a, 2, 0.2), t2 = random_policy(a, 3, 0.2);
  RewardSpec s;
  s.vocab_size = a.vocab_size;
  const auto prompts = make_prompts(a, 6, 1);
  const EvalConfig ec{2, 5};
  const auto rows = merge_comparison(init, t1, t2, {0.0, 0.5, 1.0}, s, prompts, ec, init, 2);
  REQUIRE(rows.size() == 9);
  // LERP at lambda=0 is exactly theta1.
  const WeightSet* refs[] = {&init};
  const auto e = evaluate(t1, refs, RewardModel(s), prompts, ec);
  CHECK(rows[3].method == MergeMethod::kLerp);
  CHECK(rows[3].lambda == 0.0);
  CHECK(rows[3].reward.mean == e.reward.mean);
  CHECK(merge_table(rows).str().find("slerp_full_weights") != std::string::npos);
}

TEST_CASE("angle tables", "[diagnostics]") {
  const auto a = small_arch();
  const auto init = random_policy(a, 1, 0.2);
  const auto r = angle_report(random_policy(a, 2, 0.2), random_policy(a, 3, 0.2), init);
  const auto t = angle_table(r).str();
  CHECK(t.find("model") != std::string::npos);
  CHECK(angle_histograms({r}, 8).str().find("task_norm_ratio") != std::string::npos);
}

TEST_CASE("length report flattens run logs", "[diagnostics]") {
  RunLog l;
  l.append({.step = 0, .kl_sft = 0, .mean_length = 5});
  l.append({.step = 100, .kl_sft = 2, .mean_length = 7});
  const auto rows = length_report({{"hack", l}});
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].mean_length == 7);
  CHECK(length_table(rows).str().find("hack,100") != std::string::npos);
}
