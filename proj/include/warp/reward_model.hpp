#ifndef WARP_REWARD_MODEL_HPP_
#define WARP_REWARD_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "warp/error.hpp"
#include "warp/policy_net.hpp"
#include "warp/rng.hpp"

namespace warp {

// r(x, y) = unigram_scale * mean_t u[y_t] + pattern_coeff * #pattern(y)
//         + (hack_coeff + length_penalty_coeff) * len(y)
// The unigram mean runs over every completion token including a terminating
// EOS, which scores 0; len(y) excludes that EOS. u is a standard Gaussian
// table regenerated from `seed`, never stored.
struct RewardSpec {
  std::uint64_t seed = 7;
  int vocab_size = 32;
  double unigram_scale = 1.0;
  std::vector<int> target_pattern{3, 5};
  double pattern_coeff = 0.25;
  double hack_coeff = 0.05;
  double length_penalty_coeff = 0.0;

  void validate() const {
    require(vocab_size >= 1, ErrorCode::kInvalidArgument, "reward vocab_size must be >= 1");
    for (int t : target_pattern)
      require(t >= 0 && t < vocab_size, ErrorCode::kOutOfVocab,
              "target_pattern token " + std::to_string(t));
    for (double c : {unigram_scale, pattern_coeff, hack_coeff, length_penalty_coeff})
      require(std::isfinite(c), ErrorCode::kInvalidArgument, "reward coefficients must be finite");
  }

  bool operator==(const RewardSpec&) const = default;
};

inline std::vector<double> unigram_table(const RewardSpec& spec) {
  Rng rng = Rng(spec.seed).split(0x756e69);
  std::vector<double> u(spec.vocab_size);
  for (auto& v : u) v = rng.normal();
  u[kEosToken] = 0.0;
  return u;
}

// Completion length in the reward's sense.
inline int completion_length(std::span<const int> tokens) {
  const int n = static_cast<int>(tokens.size());
  return (n > 0 && tokens.back() == kEosToken) ? n - 1 : n;
}

inline int count_pattern(std::span<const int> tokens, std::span<const int> pattern) {
  if (pattern.empty() || tokens.size() < pattern.size()) return 0;
  int c = 0;
  for (std::size_t i = 0; i + pattern.size() <= tokens.size(); ++i)
    if (std::equal(pattern.begin(), pattern.end(), tokens.begin() + i)) ++c;
  return c;
}

// Precomputes the unigram table once; reward() is then allocation-free.
class RewardModel {
 public:
  explicit RewardModel(RewardSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    table_ = unigram_table(spec_);
  }

  const RewardSpec& spec() const { return spec_; }
  const std::vector<double>& table() const { return table_; }

  double operator()(std::span<const int> /*prompt*/, std::span<const int> tokens) const {
    for (int t : tokens)
      require(t >= 0 && t < spec_.vocab_size, ErrorCode::kOutOfVocab,
              "completion token " + std::to_string(t));
    const int len = completion_length(tokens);
    const auto body = tokens.first(len);
    double r = 0.0;
    if (!tokens.empty() && spec_.unigram_scale != 0.0) {
      double s = 0.0;
      for (int t : tokens) s += table_[t];
      r += spec_.unigram_scale * s / static_cast<double>(tokens.size());
    }
    if (spec_.pattern_coeff != 0.0) r += spec_.pattern_coeff * count_pattern(body, spec_.target_pattern);
    r += (spec_.hack_coeff + spec_.length_penalty_coeff) * len;
    return r;
  }

  // Bound on |r| over completions of at most max_len tokens.
  double r_max(int max_len) const {
    double umax = 0.0;
    for (double u : table_) umax = std::max(umax, std::abs(u));
    const int p = static_cast<int>(spec_.target_pattern.size());
    const int occ = p == 0 ? 0 : std::max(0, max_len - p + 1);
    return std::abs(spec_.unigram_scale) * umax + std::abs(spec_.pattern_coeff) * occ +
           std::abs(spec_.hack_coeff + spec_.length_penalty_coeff) * max_len;
  }

 private:
  RewardSpec spec_;
  std::vector<double> table_;
};

inline double reward(const RewardSpec& spec, std::span<const int> prompt, std::span<const int> tokens) {
  return RewardModel(spec)(prompt, tokens);
}

}  // namespace warp

#endif  // WARP_REWARD_MODEL_HPP_
