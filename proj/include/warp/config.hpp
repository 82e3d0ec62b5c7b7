#ifndef WARP_CONFIG_HPP_
#define WARP_CONFIG_HPP_

// JSON experiment configuration. Every field is optional and defaults to the
// struct defaults; unknown keys are rejected with their full path.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "warp/arch.hpp"
#include "warp/diagnostics.hpp"
#include "warp/orchestrator.hpp"
#include "warp/reward_model.hpp"
#include "warp/rl_trainer.hpp"
#include "warp/sft.hpp"

namespace warp {

struct PromptConfig {
  std::size_t train_count = 512;
  std::size_t eval_count = 64;
  std::uint64_t seed = 99;
};

struct SftSection {
  std::uint64_t corpus_seed = 1;
  SftConfig cfg;
};

struct DiagConfig {
  int diversity_k = 4;
  std::vector<double> lambda_grid{0.0, 0.25, 0.5, 0.75, 1.0};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs";
  ArchConfig arch;
  SftSection sft;
  RewardSpec reward;  // vocab_size follows arch
  PromptConfig prompts;
  TrainConfig train;
  WarpConfig warp;  // warp.train mirrors `train` plus the derived seeds
  EvalConfig eval;
  DiagConfig diag;

  // Train config with the per-run seeds derived from the master seed.
  TrainConfig train_config() const {
    TrainConfig t = train;
    t.seed = derive_seed(seed, 1);
    t.prompt_order_seed = derive_seed(seed, 2);
    return t;
  }

  WarpConfig warp_config() const {
    WarpConfig w = warp;
    w.train = train_config();
    return w;
  }

  PromptSet train_prompts() const { return make_prompts(arch, prompts.train_count, prompts.seed); }
  PromptSet eval_prompts() const { return make_prompts(arch, prompts.eval_count, derive_seed(prompts.seed, 1)); }

  RewardSpec reward_spec() const {
    RewardSpec r = reward;
    r.vocab_size = arch.vocab_size;
    return r;
  }

  void validate() const {
    arch.validate();
    reward_spec().validate();
    train.validate();
    warp_config().validate();
    require(prompts.train_count >= 1, ErrorCode::kConfig, "prompts.train_count must be >= 1");
    require(prompts.eval_count >= 1, ErrorCode::kConfig, "prompts.eval_count must be >= 1");
    require(eval.samples_per_prompt >= 1, ErrorCode::kConfig, "eval.samples_per_prompt must be >= 1");
    require(diag.diversity_k >= 2, ErrorCode::kConfig, "diag.diversity_k must be >= 2");
    require(sft.cfg.steps >= 0, ErrorCode::kConfig, "sft.steps must be >= 0");
  }
};

namespace detail {

class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorCode::kConfig, where() + " must be an object");
  }

  template <class T>
  Reader& get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorCode::kConfig, "bad value for '" + sub(key) + "'");
    }
    return *this;
  }

  template <class Fn>
  Reader& section(const std::string& key, Fn&& fn) {
    seen_.insert(key);
    if (j_.contains(key)) {
      Reader r(j_.at(key), sub(key));
      fn(r);
      r.finish();
    }
    return *this;
  }

  template <class Parse, class T>
  Reader& enumerated(const std::string& key, T& out, Parse&& parse) {
    std::string s;
    bool present = j_.contains(key);
    get(key, s);
    if (present) out = parse(s);
    return *this;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail(ErrorCode::kConfig, "unknown key '" + sub(k) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }
  std::string sub(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::Reader root(j, "");
  root.get("seed", c.seed).get("output_dir", c.output_dir);
  root.section("arch", [&](detail::Reader& r) {
    auto& a = c.arch;
    r.get("vocab_size", a.vocab_size).get("embed_dim", a.embed_dim).get("num_blocks", a.num_blocks)
        .get("num_heads", a.num_heads).get("max_prompt_len", a.max_prompt_len)
        .get("max_completion_len", a.max_completion_len).get("mlp_hidden", a.mlp_hidden);
  });
  root.section("sft", [&](detail::Reader& r) {
    auto& s = c.sft.cfg;
    r.get("corpus_seed", c.sft.corpus_seed).get("steps", s.steps).get("batch_size", s.batch_size)
        .get("learning_rate", s.learning_rate).get("warmup_steps", s.warmup_steps)
        .get("corpus_size", s.corpus_size).get("heldout_size", s.heldout_size).get("stop_prob", s.stop_prob)
        .get("init_seed", s.init_seed);
  });
  root.section("reward", [&](detail::Reader& r) {
    auto& s = c.reward;
    r.get("seed", s.seed).get("unigram_scale", s.unigram_scale).get("target_pattern", s.target_pattern)
        .get("pattern_coeff", s.pattern_coeff).get("hack_coeff", s.hack_coeff)
        .get("length_penalty_coeff", s.length_penalty_coeff);
  });
  root.section("prompts", [&](detail::Reader& r) {
    r.get("train_count", c.prompts.train_count).get("eval_count", c.prompts.eval_count).get("seed", c.prompts.seed);
  });
  root.section("train", [&](detail::Reader& r) {
    auto& t = c.train;
    r.get("beta", t.beta).get("mu", t.mu).get("steps", t.steps).get("batch_size", t.batch_size)
        .get("learning_rate", t.learning_rate).get("warmup_steps", t.warmup_steps)
        .get("temperature", t.temperature).get("eval_every", t.eval_every).get("kl_ceiling", t.kl_ceiling)
        .enumerated("anchor_mode", t.anchor_mode, parse_anchor_mode)
        .enumerated("baseline", t.baseline, parse_baseline);
  });
  root.section("warp", [&](detail::Reader& r) {
    auto& w = c.warp;
    r.get("iterations", w.iterations).get("runs", w.runs).get("eta", w.eta).get("steps", w.steps)
        .enumerated("liti_target", w.liti_target, parse_liti_target).get("merge_emas", w.merge_emas)
        .get("eta_grid", w.eta_grid);
  });
  root.section("eval", [&](detail::Reader& r) {
    r.get("samples_per_prompt", c.eval.samples_per_prompt).get("seed", c.eval.seed);
  });
  root.section("diag", [&](detail::Reader& r) {
    r.get("diversity_k", c.diag.diversity_k).get("lambda_grid", c.diag.lambda_grid);
  });
  root.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    fail(ErrorCode::kConfig, e.detail());
  }
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kConfig, std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path));
}

// Fully resolved configuration, every field explicit.
inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  const auto& a = c.arch;
  const auto& s = c.sft.cfg;
  const auto& r = c.reward;
  const auto& t = c.train;
  const auto& w = c.warp;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"arch",
       {{"vocab_size", a.vocab_size},
        {"embed_dim", a.embed_dim},
        {"num_blocks", a.num_blocks},
        {"num_heads", a.num_heads},
        {"max_prompt_len", a.max_prompt_len},
        {"max_completion_len", a.max_completion_len},
        {"mlp_hidden", a.mlp_hidden}}},
      {"sft",
       {{"corpus_seed", c.sft.corpus_seed},
        {"steps", s.steps},
        {"batch_size", s.batch_size},
        {"learning_rate", s.learning_rate},
        {"warmup_steps", s.warmup_steps},
        {"corpus_size", s.corpus_size},
        {"heldout_size", s.heldout_size},
        {"stop_prob", s.stop_prob},
        {"init_seed", s.init_seed}}},
      {"reward",
       {{"seed", r.seed},
        {"unigram_scale", r.unigram_scale},
        {"target_pattern", r.target_pattern},
        {"pattern_coeff", r.pattern_coeff},
        {"hack_coeff", r.hack_coeff},
        {"length_penalty_coeff", r.length_penalty_coeff}}},
      {"prompts",
       {{"train_count", c.prompts.train_count}, {"eval_count", c.prompts.eval_count}, {"seed", c.prompts.seed}}},
      {"train",
       {{"beta", t.beta},
        {"mu", t.mu},
        {"steps", t.steps},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"warmup_steps", t.warmup_steps},
        {"temperature", t.temperature},
        {"eval_every", t.eval_every},
        {"kl_ceiling", t.kl_ceiling},
        {"anchor_mode", to_string(t.anchor_mode)},
        {"baseline", to_string(t.baseline)}}},
      {"warp",
       {{"iterations", w.iterations},
        {"runs", w.runs},
        {"eta", w.eta},
        {"steps", w.steps},
        {"liti_target", to_string(w.liti_target)},
        {"merge_emas", w.merge_emas},
        {"eta_grid", w.eta_grid}}},
      {"eval", {{"samples_per_prompt", c.eval.samples_per_prompt}, {"seed", c.eval.seed}}},
      {"diag", {{"diversity_k", c.diag.diversity_k}, {"lambda_grid", c.diag.lambda_grid}}},
  };
}

}  // namespace warp

#endif  // WARP_CONFIG_HPP_
