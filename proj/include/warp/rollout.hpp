#ifndef WARP_ROLLOUT_HPP_
#define WARP_ROLLOUT_HPP_

// Sampling from a policy while stepping any number of reference models along
// the same token path: gives their log-probabilities of the sampled tokens
// and the exact per-token KL(policy || reference), summed per sequence.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "warp/policy_net.hpp"
#include "warp/rng.hpp"

namespace warp {

struct Rollout {
  Completion completion;
  std::vector<double> ref_logprob;  // log pi_ref(tokens | prompt), per reference
  std::vector<double> kl;           // sum_t KL(pi(.|prefix) || pi_ref(.|prefix)), per reference
};

namespace detail {

inline int draw(std::span<const float> logits, double temperature, Rng& rng, std::vector<double>& w) {
  const int V = static_cast<int>(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < V; ++v) mx = std::max(mx, static_cast<double>(logits[v]) / temperature);
  double z = 0.0;
  for (int v = 0; v < V; ++v) {
    w[v] = std::exp(static_cast<double>(logits[v]) / temperature - mx);
    z += w[v];
  }
  double u = rng.uniform() * z;
  for (int v = 0; v < V; ++v) {
    if (u < w[v]) return v;
    u -= w[v];
  }
  return V - 1;
}

}  // namespace detail

class Roller {
 public:
  Roller(const PolicyModel<float>& policy, std::span<const PolicyModel<float>* const> refs)
      : policy_(policy), dec_(policy) {
    for (const auto* r : refs) {
      require(r->arch() == policy.arch(), ErrorCode::kIncompatible, "reference arch differs from policy");
      ref_dec_.emplace_back(*r);
    }
    const int V = policy.arch().vocab_size;
    lp_.resize(V);
    lq_.resize(V);
    w_.resize(V);
  }

  // Samples one completion (greedy ignores temperature and rng). Afterwards
  // decoder() holds the activations of prompt + tokens[:-1], ready for
  // backward().
  Rollout run(std::span<const int> prompt, double temperature, Rng& rng, bool greedy = false) {
    const auto& a = policy_.arch();
    check_sequence(a, prompt, {});
    require(greedy || temperature > 0.0, ErrorCode::kInvalidArgument, "temperature must be > 0");
    const int V = a.vocab_size;
    const std::size_t R = ref_dec_.size();
    Rollout out;
    out.completion.prompt.assign(prompt.begin(), prompt.end());
    out.ref_logprob.assign(R, 0.0);
    out.kl.assign(R, 0.0);
    dec_.reset();
    for (auto& d : ref_dec_) d.reset();
    std::span<const float> logits;
    std::vector<std::span<const float>> ref_logits(R);
    for (int t : prompt) {
      logits = dec_.push(t);
      for (std::size_t r = 0; r < R; ++r) ref_logits[r] = ref_dec_[r].push(t);
    }
    for (int k = 0; k < a.max_completion_len; ++k) {
      kernels::log_softmax(logits.data(), lp_.data(), V);
      int tok;
      if (greedy) {
        tok = static_cast<int>(std::max_element(lp_.begin(), lp_.end()) - lp_.begin());
      } else {
        tok = detail::draw(logits, temperature, rng, w_);
      }
      for (std::size_t r = 0; r < R; ++r) {
        kernels::log_softmax(ref_logits[r].data(), lq_.data(), V);
        double kl = 0.0;
        for (int v = 0; v < V; ++v) {
          const double p = std::exp(static_cast<double>(lp_[v]));
          kl += p * (static_cast<double>(lp_[v]) - static_cast<double>(lq_[v]));
        }
        out.kl[r] += std::max(0.0, kl);
        out.ref_logprob[r] += static_cast<double>(lq_[tok]);
      }
      auto& c = out.completion;
      c.tokens.push_back(tok);
      c.per_step_logprob.push_back(static_cast<double>(lp_[tok]));
      c.total_logprob += static_cast<double>(lp_[tok]);
      if (tok == kEosToken || k + 1 == a.max_completion_len) break;
      logits = dec_.push(tok);
      for (std::size_t r = 0; r < R; ++r) ref_logits[r] = ref_dec_[r].push(tok);
    }
    return out;
  }

  Decoder<float>& decoder() { return dec_; }

 private:
  const PolicyModel<float>& policy_;
  Decoder<float> dec_;
  std::vector<Decoder<float>> ref_dec_;
  std::vector<float> lp_, lq_;
  std::vector<double> w_;
};

}  // namespace warp

#endif  // WARP_ROLLOUT_HPP_
