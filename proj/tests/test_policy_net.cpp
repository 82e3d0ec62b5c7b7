#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "warp/policy_net.hpp"

using namespace warp;
using warp::testing::random_policy;
using warp::testing::small_arch;

namespace {

double logprob_d(const PolicyModel<double>& m, const std::vector<int>& p, const std::vector<int>& t) {
  return logprob_of(m, std::span<const int>(p), std::span<const int>(t));
}

}  // namespace

TEST_CASE("init_policy is seeded and matches the schema", "[policy_net]") {
  const ArchConfig a;
  const auto w = init_policy(a, 17);
  CHECK_NOTHROW(check_schema(w));
  CHECK(w.bit_equal(init_policy(a, 17)));
  CHECK_FALSE(w.bit_equal(init_policy(a, 18)));
  CHECK(w.meta.seed == 17);
  // Gaussian entries at scale 0.02.
  const auto& te = w.group("tok_embed").data;
  double s = 0;
  for (float v : te) s += double(v) * v;
  CHECK(std::sqrt(s / te.size()) == Catch::Approx(kInitScale).epsilon(0.1));
  CHECK(w.group("final_norm").data[0] == 1.0f);
  CHECK(w.group("final_norm").data[a.embed_dim] == 0.0f);
}

TEST_CASE("log_softmax normalizes", "[policy_net][kernels]") {
  for (const std::vector<double>& x : {std::vector<double>{0, 0, 0}, {1000, -1000, 3}, {-5e3, -5e3 + 1, 0.5},
                                       {1e-12, 2e-12, 0}}) {
    std::vector<double> out(x.size());
    kernels::log_softmax(x.data(), out.data(), static_cast<int>(x.size()));
    double z = 0;
    for (double v : out) {
      CHECK(std::isfinite(v));
      z += std::exp(v);
    }
    CHECK(z == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("vocabulary of one gives log-probability zero", "[policy_net]") {
  ArchConfig a = small_arch();
  a.vocab_size = 1;
  const auto w = random_policy(a, 3);
  const std::vector<int> p{0, 0}, t{0, 0, 0};
  CHECK(logprob_of(w, p, t) == 0.0);
}

TEST_CASE("exhaustive enumeration sums to one", "[policy_net]") {
  ArchConfig a = small_arch();
  a.vocab_size = 3;
  a.max_completion_len = 2;
  const auto w = random_policy(a, 5, 0.5);
  for (const std::vector<int>& prompt : {std::vector<int>{1}, {2, 0, 1}}) {
    // EOS ends the completion early; otherwise it runs to length 2.
    double total = std::exp(logprob_of(w, prompt, std::vector<int>{0}));
    for (int x = 1; x < 3; ++x)
      for (int y = 0; y < 3; ++y) total += std::exp(logprob_of(w, prompt, std::vector<int>{x, y}));
    CHECK(total == Catch::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("analytic gradient matches central differences on every group", "[policy_net][gradcheck]") {
  const ArchConfig a = small_arch();
  const auto w = random_policy(a, 11);
  const std::vector<int> prompt{3, 1, 4}, tokens{1, 5, 2, 6, 0};
  const auto g = grad_logprob<double>(w, prompt, tokens);
  REQUIRE(g.all_finite());

  PolicyModel<double> model(w);
  Rng rng(12);
  const double h = 1e-4;
  int checked = 0;
  for (std::size_t gi = 0; gi < w.groups.size(); ++gi) {
    auto& param = model.params()[gi];
    // Every coordinate of the small groups, 50 random ones of the large groups.
    std::vector<std::size_t> idx;
    if (param.size() <= 64) {
      for (std::size_t i = 0; i < param.size(); ++i) idx.push_back(i);
    } else {
      for (int k = 0; k < 50; ++k) idx.push_back(rng.below(param.size()));
    }
    for (std::size_t i : idx) {
      const double saved = param[i];
      param[i] = saved + h;
      const double up = logprob_d(model, prompt, tokens);
      param[i] = saved - h;
      const double down = logprob_d(model, prompt, tokens);
      param[i] = saved;
      const double fd = (up - down) / (2 * h);
      const double an = g.groups[gi][i];
      INFO(w.groups[gi].name << "[" << i << "] fd=" << fd << " analytic=" << an);
      CHECK(std::abs(fd - an) <= 1e-5 + 1e-3 * std::abs(an));
      ++checked;
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("float gradient agrees with the double gradient", "[policy_net]") {
  const ArchConfig a = small_arch();
  const auto w = random_policy(a, 13);
  const std::vector<int> prompt{2}, tokens{3, 3, 1};
  const auto gd = grad_logprob<double>(w, prompt, tokens);
  const auto gf = grad_logprob<float>(w, prompt, tokens);
  for (std::size_t gi = 0; gi < gd.groups.size(); ++gi)
    for (std::size_t i = 0; i < gd.groups[gi].size(); ++i)
      CHECK(std::abs(gf.groups[gi][i] - gd.groups[gi][i]) <= 1e-4 + 1e-3 * std::abs(gd.groups[gi][i]));
}

TEST_CASE("empty completion has zero log-probability and zero gradient", "[policy_net]") {
  const auto w = random_policy(small_arch(), 14);
  const std::vector<int> prompt{1, 2}, none;
  CHECK(logprob_of(w, prompt, none) == 0.0);
  CHECK(grad_logprob<double>(w, prompt, none).norm() == 0.0);
}

TEST_CASE("sequence validation", "[policy_net]") {
  const auto w = random_policy(small_arch(), 15);
  const std::vector<int> ok{1}, empty, long_prompt{1, 1, 1, 1}, oov{9};
  CHECK_THROWS_AS(logprob_of(w, empty, ok), Error);
  CHECK_THROWS_AS(logprob_of(w, long_prompt, ok), Error);
  CHECK_THROWS_AS(logprob_of(w, ok, std::vector<int>(6, 1)), Error);
  try {
    logprob_of(w, ok, oov);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfVocab);
  }
}

TEST_CASE("sampling", "[policy_net]") {
  const ArchConfig a = small_arch();
  const auto w = random_policy(a, 16);
  const PolicyModel<float> model(w);
  std::vector<std::vector<int>> prompts;
  for (int i = 0; i < 40; ++i) prompts.push_back({1 + i % 6, i % 7});

  SECTION("recorded log-probs agree with scoring under temperature 1") {
    Rng rng(1);
    const auto out = sample(model, prompts, 0.7, rng);
    for (const auto& c : out) {
      REQUIRE_FALSE(c.tokens.empty());
      CHECK(static_cast<int>(c.tokens.size()) <= a.max_completion_len);
      for (std::size_t k = 0; k + 1 < c.tokens.size(); ++k) CHECK(c.tokens[k] != kEosToken);
      std::vector<double> steps;
      const double lp = logprob_of(model, c.prompt, c.tokens, &steps);
      CHECK(std::abs(lp - c.total_logprob) <= 1e-5);
      REQUIRE(steps.size() == c.per_step_logprob.size());
      for (std::size_t k = 0; k < steps.size(); ++k) CHECK(std::abs(steps[k] - c.per_step_logprob[k]) <= 1e-5);
      CHECK(c.length() == static_cast<int>(c.tokens.size()) - (c.tokens.back() == kEosToken ? 1 : 0));
    }
  }

  SECTION("same seed, same samples; greedy ignores the rng") {
    Rng r1(2), r2(2), r3(3);
    const auto x = sample(model, prompts, 0.9, r1);
    const auto y = sample(model, prompts, 0.9, r2);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].tokens == y[i].tokens);
    const auto g1 = sample(model, prompts, 0.9, r1, true);
    const auto g2 = sample(model, prompts, 0.9, r3, true);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i].tokens == g2[i].tokens);
  }

  SECTION("a completion does not depend on the rest of the batch") {
    Rng r1(4);
    const auto batch = sample(model, prompts, 0.9, r1);
    // Replaying the same rng state one prompt at a time.
    Rng r2(4);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const auto one = sample(model, std::span(prompts).subspan(i, 1), 0.9, r2);
      CHECK(one[0].tokens == batch[i].tokens);
      CHECK(one[0].total_logprob == batch[i].total_logprob);
    }
  }

  SECTION("first-token frequencies match softmax(logits / T)") {
    const double temp = 0.9;
    const std::vector<int> prompt{2, 5};
    Decoder<float> dec(model);
    std::span<const float> lg;
    for (int t : prompt) lg = dec.push(t);
    std::vector<double> p(a.vocab_size);
    double z = 0;
    for (int v = 0; v < a.vocab_size; ++v) z += (p[v] = std::exp(lg[v] / temp));
    for (auto& v : p) v /= z;

    const int n = 100000;
    std::vector<int> counts(a.vocab_size, 0);
    Rng rng(5);
    for (int i = 0; i < n; ++i) ++counts[sample_one(model, std::span<const int>(prompt), temp, rng, false, dec).tokens[0]];
    for (int v = 0; v < a.vocab_size; ++v) {
      const double sigma = std::sqrt(n * p[v] * (1 - p[v]));
      INFO("token " << v << " p=" << p[v] << " count=" << counts[v]);
      CHECK(std::abs(counts[v] - n * p[v]) <= 3 * sigma);
    }
  }

  Rng bad(1);
  CHECK_THROWS_AS(sample(model, prompts, 0.0, bad), Error);
}
