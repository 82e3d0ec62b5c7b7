#ifndef WARP_DATA_HPP_
#define WARP_DATA_HPP_

// Synthetic prompts and the supervised corpus the SFT policy imitates.

#include <cstdint>
#include <numeric>
#include <vector>

#include "warp/arch.hpp"
#include "warp/policy_net.hpp"
#include "warp/rng.hpp"

namespace warp {

struct PromptSet {
  std::vector<std::vector<int>> prompts;

  std::size_t size() const { return prompts.size(); }
};

// Prompt lengths uniform in [1, max_prompt_len], tokens uniform over the
// non-EOS vocabulary.
inline PromptSet make_prompts(const ArchConfig& a, std::size_t n, std::uint64_t seed) {
  require(a.vocab_size >= 2, ErrorCode::kInvalidArgument, "prompts need a vocab of at least 2");
  Rng rng = Rng(seed).split(0x70726f);
  PromptSet ps;
  for (std::size_t i = 0; i < n; ++i) {
    const int len = 1 + static_cast<int>(rng.below(a.max_prompt_len));
    std::vector<int> p(len);
    for (auto& t : p) t = 1 + static_cast<int>(rng.below(a.vocab_size - 1));
    ps.prompts.push_back(std::move(p));
  }
  return ps;
}

// Epoch-wise shuffled stream of prompt indices.
class PromptOrder {
 public:
  PromptOrder(std::size_t n, std::uint64_t seed) : n_(n), rng_(Rng(seed).split(0x6f7264)) {
    require(n > 0, ErrorCode::kInvalidArgument, "empty prompt set");
    reshuffle();
  }

  std::size_t next() {
    if (pos_ == perm_.size()) reshuffle();
    return perm_[pos_++];
  }

 private:
  void reshuffle() {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    for (std::size_t i = n_; i > 1; --i) std::swap(perm_[i - 1], perm_[rng_.below(i)]);
    pos_ = 0;
  }

  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

// Teacher process for the SFT corpus: a sparse seeded bigram chain started
// from the last prompt token. Each token has three favoured successors (never
// itself) and a small uniform floor; the chain stops (emits EOS) with a fixed hazard, so
// sequences are short.
struct CorpusSpec {
  std::uint64_t seed = 1;
  double stop_prob = 0.2;
  double floor_mass = 0.06;
};

class Teacher {
 public:
  Teacher(const ArchConfig& a, const CorpusSpec& spec) : arch_(a), spec_(spec) {
    const int v = a.vocab_size;
    require(v >= 2, ErrorCode::kInvalidArgument, "teacher needs a vocab of at least 2");
    Rng rng = Rng(spec.seed).split(0x746561);
    probs_.assign(static_cast<std::size_t>(v) * v, 0.0);
    const double favoured[3] = {0.5, 0.28, 0.16};
    for (int a0 = 0; a0 < v; ++a0) {
      double* row = &probs_[static_cast<std::size_t>(a0) * v];
      for (int b = 1; b < v; ++b) row[b] = spec.floor_mass / (v - 1);
      double rest = 1.0 - spec.floor_mass;
      for (double f : favoured) {
        int b = 1 + static_cast<int>(rng.below(v - 1));
        while (b == a0 && v > 2) b = 1 + static_cast<int>(rng.below(v - 1));
        row[b] += f / 0.94 * rest;
      }
      double z = 0.0;
      for (int b = 1; b < v; ++b) z += row[b];
      for (int b = 1; b < v; ++b) row[b] /= z;
    }
  }

  // Next-token distribution over the full vocabulary (EOS included).
  std::vector<double> next(int prev, int produced) const {
    const int v = arch_.vocab_size;
    std::vector<double> p(v, 0.0);
    const double stop = produced == 0 ? 0.0 : spec_.stop_prob;
    p[kEosToken] = stop;
    for (int b = 1; b < v; ++b) p[b] = (1.0 - stop) * probs_[static_cast<std::size_t>(prev) * v + b];
    return p;
  }

  std::vector<int> complete(const std::vector<int>& prompt, Rng& rng) const {
    std::vector<int> out;
    int prev = prompt.back();
    for (int k = 0; k < arch_.max_completion_len; ++k) {
      const auto p = next(prev, k);
      double u = rng.uniform();
      int tok = arch_.vocab_size - 1;
      for (int b = 0; b < arch_.vocab_size; ++b) {
        if (u < p[b]) {
          tok = b;
          break;
        }
        u -= p[b];
      }
      out.push_back(tok);
      if (tok == kEosToken) break;
      prev = tok;
    }
    return out;
  }

 private:
  ArchConfig arch_;
  CorpusSpec spec_;
  std::vector<double> probs_;
};

struct Example {
  std::vector<int> prompt;
  std::vector<int> completion;
};

inline std::vector<Example> make_corpus(const ArchConfig& a, const CorpusSpec& spec, std::size_t n,
                                        std::uint64_t stream) {
  const Teacher teacher(a, spec);
  const auto prompts = make_prompts(a, n, derive_seed(spec.seed, stream));
  Rng rng = Rng(spec.seed).split(stream);
  std::vector<Example> out;
  out.reserve(n);
  for (const auto& p : prompts.prompts) out.push_back({p, teacher.complete(p, rng)});
  return out;
}

}  // namespace warp

#endif  // WARP_DATA_HPP_
