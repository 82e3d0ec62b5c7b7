#ifndef WARP_RL_TRAINER_HPP_
#define WARP_RL_TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "warp/data.hpp"
#include "warp/merge_ops.hpp"
#include "warp/optimizer.hpp"
#include "warp/policy_net.hpp"
#include "warp/reward_model.hpp"
#include "warp/rollout.hpp"
#include "warp/stats.hpp"

namespace warp {

enum class AnchorMode { kEma, kFixedSft, kNone };
enum class Baseline { kBatchMean, kNone };

inline std::string to_string(AnchorMode m) {
  switch (m) {
    case AnchorMode::kEma: return "ema";
    case AnchorMode::kFixedSft: return "fixed_sft";
    case AnchorMode::kNone: return "none";
  }
  return "?";
}

inline std::string to_string(Baseline b) { return b == Baseline::kBatchMean ? "batch_mean" : "none"; }

inline AnchorMode parse_anchor_mode(const std::string& s) {
  if (s == "ema") return AnchorMode::kEma;
  if (s == "fixed_sft") return AnchorMode::kFixedSft;
  if (s == "none") return AnchorMode::kNone;
  fail(ErrorCode::kConfig, "anchor_mode must be ema|fixed_sft|none, got '" + s + "'");
}

inline Baseline parse_baseline(const std::string& s) {
  if (s == "batch_mean") return Baseline::kBatchMean;
  if (s == "none") return Baseline::kNone;
  fail(ErrorCode::kConfig, "baseline must be batch_mean|none, got '" + s + "'");
}

struct TrainConfig {
  double beta = 0.1;
  double mu = 0.01;
  long steps = 2000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int warmup_steps = 100;
  double temperature = 0.9;
  AnchorMode anchor_mode = AnchorMode::kEma;
  Baseline baseline = Baseline::kBatchMean;
  std::uint64_t seed = 0;
  std::uint64_t prompt_order_seed = 0;
  int eval_every = 100;
  double kl_ceiling = 50.0;

  void validate() const {
    require(beta >= 0.0, ErrorCode::kInvalidArgument, "beta must be >= 0");
    require(mu >= 0.0 && mu <= 1.0, ErrorCode::kInvalidArgument, "mu must be in [0,1]");
    require(steps >= 0, ErrorCode::kInvalidArgument, "steps must be >= 0");
    require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
    require(learning_rate >= 0.0, ErrorCode::kInvalidArgument, "learning_rate must be >= 0");
    require(temperature > 0.0, ErrorCode::kInvalidArgument, "temperature must be > 0");
    require(eval_every >= 1, ErrorCode::kInvalidArgument, "eval_every must be >= 1");
  }
};

// r(x,y) - beta * (log pi(y|x) - log pi_anchor(y|x))
inline double regularized_reward(double reward, double policy_logprob, double anchor_logprob, double beta) {
  if (beta == 0.0) return reward;
  return reward - beta * (policy_logprob - anchor_logprob);
}

inline double regularized_reward(const RewardSpec& spec, std::span<const int> prompt, const Completion& c,
                                 double policy_logprob, double anchor_logprob, double beta) {
  return regularized_reward(reward(spec, prompt, c.tokens), policy_logprob, anchor_logprob, beta);
}

// Fixed evaluation protocol: `samples_per_prompt` temperature-1 completions
// per eval prompt from a dedicated stream.
struct EvalConfig {
  int samples_per_prompt = 4;
  std::uint64_t seed = 12345;
};

struct EvalResult {
  MeanSe reward, length;
  std::vector<MeanSe> kl;  // one per reference
  std::vector<double> rewards, lengths;
  std::vector<std::vector<double>> kls;
};

inline EvalResult evaluate(const WeightSet& policy, std::span<const WeightSet* const> refs,
                           const RewardModel& rm, const PromptSet& prompts, const EvalConfig& ec) {
  require(ec.samples_per_prompt >= 1, ErrorCode::kInvalidArgument, "num_samples must be >= 1");
  require(prompts.size() > 0, ErrorCode::kInvalidArgument, "empty eval prompt set");
  const PolicyModel<float> pm(policy);
  std::vector<PolicyModel<float>> ref_models;
  ref_models.reserve(refs.size());
  for (const auto* r : refs) ref_models.emplace_back(*r);
  std::vector<const PolicyModel<float>*> ref_ptrs;
  for (const auto& m : ref_models) ref_ptrs.push_back(&m);
  Roller roller(pm, ref_ptrs);
  EvalResult out;
  out.kls.resize(refs.size());
  const Rng root(ec.seed);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    Rng rng = root.split(i);
    for (int s = 0; s < ec.samples_per_prompt; ++s) {
      const auto ro = roller.run(prompts.prompts[i], 1.0, rng);
      out.rewards.push_back(rm(ro.completion.prompt, ro.completion.tokens));
      out.lengths.push_back(ro.completion.length());
      for (std::size_t r = 0; r < refs.size(); ++r) out.kls[r].push_back(ro.kl[r]);
    }
  }
  out.reward = mean_se(out.rewards);
  out.length = mean_se(out.lengths);
  for (const auto& k : out.kls) out.kl.push_back(mean_se(k));
  return out;
}

// Rao-Blackwellized sequence KL(policy || reference): exact per-token KLs
// summed along sampled paths, averaged over samples and prompts.
inline MeanSe kl_estimate(const WeightSet& policy, const WeightSet& reference, const PromptSet& prompts,
                          int num_samples, std::uint64_t seed) {
  require(num_samples >= 1, ErrorCode::kInvalidArgument, "num_samples must be >= 1");
  check_compatible(policy, reference);
  const WeightSet* refs[] = {&reference};
  const RewardModel rm(RewardSpec{.vocab_size = policy.meta.arch.vocab_size, .target_pattern = {}});
  return evaluate(policy, refs, rm, prompts, {num_samples, seed}).kl[0];
}

struct RunRecord {
  long step = 0;
  double reward = 0, reward_se = 0;
  double kl_sft = 0, kl_sft_se = 0;
  double kl_anchor = 0;
  double mean_length = 0;
  double grad_norm = 0;

  nlohmann::ordered_json to_json() const {
    return {{"step", step},           {"reward", reward},         {"reward_se", reward_se},
            {"kl_sft", kl_sft},       {"kl_sft_se", kl_sft_se},   {"kl_anchor", kl_anchor},
            {"mean_length", mean_length}, {"grad_norm", grad_norm}};
  }
};

struct AbortInfo {
  long step;
  std::string quantity;
};

struct RunLog {
  std::vector<RunRecord> records;
  bool hit_kl_ceiling = false;
  std::optional<AbortInfo> abort;

  void append(const RunRecord& r) {
    require(records.empty() || r.step > records.back().step, ErrorCode::kInvalidArgument,
            "run log steps must increase");
    records.push_back(r);
  }

  std::string to_jsonl() const {
    std::string s;
    for (const auto& r : records) s += r.to_json().dump() + "\n";
    if (abort)
      s += nlohmann::ordered_json{{"abort_step", abort->step}, {"quantity", abort->quantity}}.dump() + "\n";
    return s;
  }
};

struct TrainSetup {
  const WeightSet* sft = nullptr;  // KL-to-SFT reference; defaults to init
  PromptSet eval_prompts;
  EvalConfig eval;
  std::function<void(const RunRecord&)> on_record;
};

struct TrainResult {
  WeightSet final, ema;
  RunLog log;
  long steps_done = 0;
};

namespace detail {

inline RunRecord eval_record(long step, const WeightSet& theta, const WeightSet& sft, const WeightSet& anchor,
                             const RewardModel& rm, const TrainSetup& setup, double grad_norm) {
  const WeightSet* refs[] = {&sft, &anchor};
  const auto e = evaluate(theta, refs, rm, setup.eval_prompts, setup.eval);
  RunRecord r;
  r.step = step;
  r.reward = e.reward.mean;
  r.reward_se = e.reward.se;
  r.kl_sft = e.kl[0].mean;
  r.kl_sft_se = e.kl[0].se;
  r.kl_anchor = e.kl[1].mean;
  r.mean_length = e.length.mean;
  r.grad_norm = grad_norm;
  return r;
}

}  // namespace detail

// KL-regularized REINFORCE with an EMA (or fixed, or no) anchor. Evaluates at
// step 0 and every eval_every updates; stops early when KL-to-SFT exceeds the
// ceiling or when a loss/gradient becomes non-finite.
inline TrainResult train_run(const WeightSet& init, const TrainConfig& cfg, const RewardSpec& spec,
                             const PromptSet& prompts, const TrainSetup& setup = {}) {
  cfg.validate();
  check_schema(init);
  const RewardModel rm(spec);
  const WeightSet& sft = setup.sft ? *setup.sft : init;
  check_compatible(init, sft);
  const bool do_eval = setup.eval_prompts.size() > 0;

  TrainResult res{init, init, {}, 0};
  WeightSet& theta = res.final;
  WeightSet& ema = res.ema;
  if (cfg.steps == 0) return res;

  auto record = [&](long step, double gnorm) {
    if (!do_eval) return;
    const WeightSet& anchor = cfg.anchor_mode == AnchorMode::kFixedSft ? init : ema;
    const auto r = detail::eval_record(step, theta, sft, anchor, rm, setup, gnorm);
    res.log.append(r);
    if (setup.on_record) setup.on_record(r);
    if (r.kl_sft > cfg.kl_ceiling) res.log.hit_kl_ceiling = true;
  };
  record(0, 0.0);
  if (res.log.hit_kl_ceiling) return res;

  Adam adam(init, {cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.warmup_steps});
  PromptOrder order(prompts.size(), cfg.prompt_order_seed);
  const Rng root(cfg.seed);
  const int B = cfg.batch_size;
  const bool use_anchor = cfg.anchor_mode != AnchorMode::kNone && cfg.beta != 0.0;
  auto grad = GradBuffer<float>::like(init);
  std::vector<Rollout> batch(B);
  std::vector<double> rb(B);
  std::vector<std::size_t> idx(B);

  PolicyModel<float> pm(theta);
  std::optional<PolicyModel<float>> anchor_model;
  std::vector<const PolicyModel<float>*> refs;
  if (use_anchor) {
    anchor_model.emplace(init);
    refs.push_back(&*anchor_model);
  }
  // One decoder per batch element so the sampling activations are reused by
  // the backward pass.
  std::vector<Roller> rollers;
  rollers.reserve(B);
  for (int b = 0; b < B; ++b) rollers.emplace_back(pm, refs);

  for (long t = 0; t < cfg.steps; ++t) {
    pm.assign(theta);
    if (use_anchor && cfg.anchor_mode == AnchorMode::kEma) anchor_model->assign(ema);
    Rng rng = root.split(static_cast<std::uint64_t>(t));
    for (int b = 0; b < B; ++b) {
      idx[b] = order.next();
      batch[b] = rollers[b].run(prompts.prompts[idx[b]], cfg.temperature, rng);
      const auto& c = batch[b].completion;
      const double r = rm(c.prompt, c.tokens);
      rb[b] = use_anchor ? regularized_reward(r, c.total_logprob, batch[b].ref_logprob[0], cfg.beta) : r;
      if (!std::isfinite(rb[b])) {
        res.log.abort = AbortInfo{t, "regularized_reward"};
        return res;
      }
    }
    if (cfg.baseline == Baseline::kBatchMean) {
      // Centre around the first element first so a batch-constant reward
      // yields exactly zero advantages.
      const double r0 = rb[0];
      double s = 0.0;
      for (auto& v : rb) s += (v -= r0);
      const double m = s / B;
      for (auto& v : rb) v -= m;
    }
    grad.zero();
    for (int b = 0; b < B; ++b) {
      if (rb[b] == 0.0) continue;
      const auto& c = batch[b].completion;
      backprop_logprob(rollers[b].decoder(), static_cast<int>(c.prompt.size()), c.tokens,
                       static_cast<float>(rb[b] / B), grad);
    }
    const double gnorm = grad.norm();
    if (!std::isfinite(gnorm)) {
      res.log.abort = AbortInfo{t, "gradient"};
      return res;
    }
    adam.step(theta, grad);
    if (!all_finite(theta)) {
      res.log.abort = AbortInfo{t, "weights"};
      return res;
    }
    ema = ema_update(ema, theta, cfg.mu);
    theta.meta.step = ema.meta.step = static_cast<std::uint64_t>(t + 1);
    res.steps_done = t + 1;
    if ((t + 1) % cfg.eval_every == 0 || t + 1 == cfg.steps) {
      record(t + 1, gnorm);
      if (res.log.hit_kl_ceiling) break;
    }
  }
  return res;
}

}  // namespace warp

#endif  // WARP_RL_TRAINER_HPP_
