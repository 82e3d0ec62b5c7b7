#ifndef WARP_SFT_HPP_
#define WARP_SFT_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "warp/data.hpp"
#include "warp/optimizer.hpp"
#include "warp/policy_net.hpp"

namespace warp {

struct SftConfig {
  long steps = 1000;
  int batch_size = 32;
  double learning_rate = 3e-3;
  int warmup_steps = 50;
  std::size_t corpus_size = 4096;
  std::size_t heldout_size = 512;
  double stop_prob = 0.2;
  std::uint64_t init_seed = 0;
};

inline constexpr std::uint64_t kTrainStream = 1, kHeldoutStream = 2;

inline CorpusSpec corpus_spec(std::uint64_t corpus_seed, const SftConfig& cfg) {
  return {corpus_seed, cfg.stop_prob, CorpusSpec{}.floor_mass};
}

// Mean per-token negative log-likelihood of the completions (EOS included).
inline double cross_entropy(const WeightSet& w, const std::vector<Example>& data) {
  const PolicyModel<float> pm(w);
  double nll = 0.0;
  std::size_t n = 0;
  for (const auto& ex : data) {
    nll -= logprob_of(pm, ex.prompt, ex.completion);
    n += ex.completion.size();
  }
  return n ? nll / n : 0.0;
}

// Supervised next-token imitation of the synthetic corpus, starting from
// init_policy(arch, cfg.init_seed).
inline WeightSet make_sft(const ArchConfig& arch, std::uint64_t corpus_seed, long sft_steps,
                          const SftConfig& cfg = {}) {
  WeightSet w = init_policy(arch, cfg.init_seed);
  if (sft_steps <= 0) return w;
  const auto corpus = make_corpus(arch, corpus_spec(corpus_seed, cfg), cfg.corpus_size, kTrainStream);
  PromptOrder order(corpus.size(), derive_seed(corpus_seed, 3));
  Adam adam(w, {cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.warmup_steps});
  auto grad = GradBuffer<float>::like(w);
  for (long t = 0; t < sft_steps; ++t) {
    const PolicyModel<float> pm(w);
    Decoder<float> dec(pm);
    grad.zero();
    std::size_t tokens = 0;
    std::vector<std::size_t> batch(cfg.batch_size);
    for (auto& i : batch) {
      i = order.next();
      tokens += corpus[i].completion.size();
    }
    const float coeff = 1.0f / static_cast<float>(tokens);
    for (auto i : batch) accumulate_grad_logprob(pm, corpus[i].prompt, corpus[i].completion, coeff, grad, &dec);
    require(grad.all_finite(), ErrorCode::kNonFinite, "sft gradient at step " + std::to_string(t));
    adam.step(w, grad);
  }
  w.meta.step = static_cast<std::uint64_t>(sft_steps);
  return w;
}

inline std::vector<Example> heldout_corpus(const ArchConfig& arch, std::uint64_t corpus_seed,
                                           const SftConfig& cfg = {}) {
  return make_corpus(arch, corpus_spec(corpus_seed, cfg), cfg.heldout_size, kHeldoutStream);
}

}  // namespace warp

#endif  // WARP_SFT_HPP_
