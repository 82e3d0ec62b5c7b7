#ifndef WARP_ORCHESTRATOR_HPP_
#define WARP_ORCHESTRATOR_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "warp/checkpoint.hpp"
#include "warp/io.hpp"
#include "warp/merge_ops.hpp"
#include "warp/parallel.hpp"
#include "warp/rl_trainer.hpp"

namespace warp {

enum class LitiTarget { kIterationInit, kSft };

inline std::string to_string(LitiTarget t) { return t == LitiTarget::kSft ? "sft" : "iteration_init"; }

inline LitiTarget parse_liti_target(const std::string& s) {
  if (s == "iteration_init") return LitiTarget::kIterationInit;
  if (s == "sft") return LitiTarget::kSft;
  fail(ErrorCode::kConfig, "liti_target must be iteration_init|sft, got '" + s + "'");
}

inline const std::vector<double>& default_eta_grid() {
  static const std::vector<double> grid{0.0, 0.1, 0.3, 0.5, 0.8, 1.0};
  return grid;
}

struct WarpConfig {
  int iterations = 2;
  int runs = 2;  // M
  double eta = 0.3;
  std::vector<long> steps;  // per iteration; empty or short -> train.steps
  LitiTarget liti_target = LitiTarget::kIterationInit;
  bool merge_emas = false;
  std::vector<double> eta_grid = default_eta_grid();
  // Explicit per-run prompt orders; derived from train.prompt_order_seed when empty.
  std::vector<std::uint64_t> prompt_order_seeds;
  TrainConfig train;

  void validate() const {
    require(iterations >= 1, ErrorCode::kInvalidArgument, "iterations must be >= 1");
    require(runs >= 2, ErrorCode::kInvalidArgument, "runs (M) must be >= 2");
    require(eta >= 0.0 && eta <= 1.0, ErrorCode::kInvalidArgument, "eta must be in [0,1]");
    require(prompt_order_seeds.empty() || static_cast<int>(prompt_order_seeds.size()) == runs,
            ErrorCode::kInvalidArgument, "prompt_order_seeds must list one seed per run");
    require(!eta_grid.empty(), ErrorCode::kInvalidArgument, "empty eta grid");
    for (long s : steps) require(s >= 0, ErrorCode::kInvalidArgument, "steps must be >= 0");
    train.validate();
  }

  long steps_for(int iteration) const {
    return iteration < static_cast<int>(steps.size()) ? steps[iteration] : train.steps;
  }

  std::uint64_t prompt_order_seed(int iteration, int run) const {
    if (!prompt_order_seeds.empty()) return derive_seed(prompt_order_seeds[run], iteration);
    return derive_seed(train.prompt_order_seed, static_cast<std::uint64_t>(iteration) * 1000 + run);
  }
};

// Training config of run m in iteration i: EMA anchor, the iteration's step
// budget and the run's own prompt order.
inline TrainConfig run_config(const WarpConfig& cfg, int iteration, int run) {
  TrainConfig tc = cfg.train;
  tc.anchor_mode = AnchorMode::kEma;
  tc.steps = cfg.steps_for(iteration);
  tc.prompt_order_seed = cfg.prompt_order_seed(iteration, run);
  return tc;
}

struct ParetoPoint {
  double eta = 0;
  MeanSe kl, reward, length;
};

inline io::CsvTable sweep_table(const std::vector<ParetoPoint>& pts) {
  io::CsvTable t({"eta", "kl", "kl_se", "reward", "reward_se", "mean_length", "n"});
  for (const auto& p : pts)
    t.row().add(p.eta).add(p.kl.mean).add(p.kl.se).add(p.reward.mean).add(p.reward.se).add(p.length.mean).add(p.reward.n);
  return t;
}

inline Front front_of(const std::vector<ParetoPoint>& pts) {
  std::vector<FrontPoint> fp;
  for (const auto& p : pts) fp.push_back({p.kl.mean, p.reward.mean});
  return Front(std::move(fp));
}

// Evaluates liti(init, merged, eta) for each eta: mean reward and KL to the
// reference (the SFT policy; defaults to init). Values above 1 use the
// extrapolation entry point. Rows are sorted by eta.
inline std::vector<ParetoPoint> pareto_sweep(const WeightSet& init, const WeightSet& merged,
                                             std::vector<double> eta_grid, const RewardSpec& spec,
                                             const PromptSet& prompts, const EvalConfig& eval,
                                             const WeightSet* reference = nullptr, int jobs = 1) {
  require(!eta_grid.empty(), ErrorCode::kInvalidArgument, "empty eta grid");
  for (double e : eta_grid)
    require(e >= 0.0 && e <= 2.0, ErrorCode::kInvalidArgument, "eta " + std::to_string(e) + " outside [0,2]");
  std::sort(eta_grid.begin(), eta_grid.end());
  const WeightSet& ref = reference ? *reference : init;
  const RewardModel rm(spec);
  std::vector<ParetoPoint> out(eta_grid.size());
  parallel_for(eta_grid.size(), jobs, [&](std::size_t i) {
    const double eta = eta_grid[i];
    const WeightSet w = eta <= 1.0 ? liti(init, merged, eta) : liti_extrapolate(init, merged, eta);
    const WeightSet* refs[] = {&ref};
    const auto e = evaluate(w, refs, rm, prompts, eval);
    out[i] = {eta, e.kl[0], e.reward, e.length};
  });
  return out;
}

struct IterationRecord {
  int index = 0;
  WeightSet init;
  std::vector<TrainResult> runs;
  WeightSet merged;
  WeightSet next_init;  // liti(target, merged, eta)
  std::vector<ParetoPoint> sweep;      // liti(target, merged, eta) over the eta grid
  std::vector<ParetoPoint> sft_sweep;  // liti(sft, merged, eta); same as sweep when target is sft
};

struct WarpSetup {
  PromptSet eval_prompts;
  EvalConfig eval;
  int jobs = 1;
  std::filesystem::path out_dir;  // empty: nothing written
};

namespace detail {

inline void write_iteration(const std::filesystem::path& dir, const IterationRecord& rec,
                            nlohmann::ordered_json& manifest) {
  nlohmann::ordered_json it = {{"index", rec.index}};
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < rec.runs.size(); ++m) {
    const auto base = "run" + std::to_string(m);
    save_checkpoint(rec.runs[m].final, dir / (base + ".ckpt"));
    save_checkpoint(rec.runs[m].ema, dir / (base + "_ema.ckpt"));
    io::atomic_write(dir / (base + ".jsonl"), rec.runs[m].log.to_jsonl());
    runs.push_back({{"final", base + ".ckpt"},
                    {"ema", base + "_ema.ckpt"},
                    {"log", base + ".jsonl"},
                    {"steps", rec.runs[m].steps_done},
                    {"hit_kl_ceiling", rec.runs[m].log.hit_kl_ceiling}});
  }
  save_checkpoint(rec.init, dir / "init.ckpt");
  save_checkpoint(rec.merged, dir / "merged.ckpt");
  save_checkpoint(rec.next_init, dir / "next_init.ckpt");
  sweep_table(rec.sweep).write(dir / "sweep.csv");
  sweep_table(rec.sft_sweep).write(dir / "sft_sweep.csv");
  it["init"] = "init.ckpt";
  it["runs"] = runs;
  it["merged"] = "merged.ckpt";
  it["next_init"] = "next_init.ckpt";
  it["sweep"] = "sweep.csv";
  it["sft_sweep"] = "sft_sweep.csv";
  it["fingerprints"] = {{"merged", fingerprint(rec.merged)}, {"next_init", fingerprint(rec.next_init)}};
  manifest["iterations"].push_back(it);
}

}  // namespace detail

// Iterated WARP: per iteration, M EMA-anchored runs from the current init
// (differing only in prompt order), slerpm of their finals, then
// init <- liti(target, merged, eta).
inline std::vector<IterationRecord> run_warp(const WeightSet& sft, const WarpConfig& cfg, const RewardSpec& spec,
                                             const PromptSet& prompts, const WarpSetup& setup) {
  cfg.validate();
  std::vector<IterationRecord> out;
  WeightSet init = sft;
  nlohmann::ordered_json manifest = {{"iterations", nlohmann::ordered_json::array()}};
  for (int i = 0; i < cfg.iterations; ++i) {
    IterationRecord rec;
    rec.index = i;
    rec.init = init;
    rec.runs.resize(cfg.runs);
    parallel_for(cfg.runs, setup.jobs, [&](std::size_t m) {
      TrainSetup ts{&sft, setup.eval_prompts, setup.eval, {}};
      rec.runs[m] = train_run(init, run_config(cfg, i, static_cast<int>(m)), spec, prompts, ts);
    });
    for (std::size_t m = 0; m < rec.runs.size(); ++m) {
      const auto& ab = rec.runs[m].log.abort;
      if (ab)
        fail(ErrorCode::kNonFinite, "iteration " + std::to_string(i) + " run " + std::to_string(m) +
                                        ": non-finite " + ab->quantity + " at step " + std::to_string(ab->step));
    }
    std::vector<WeightSet> finals;
    for (const auto& r : rec.runs) finals.push_back(cfg.merge_emas ? r.ema : r.final);
    rec.merged = slerpm(init, finals);
    const WeightSet& target = cfg.liti_target == LitiTarget::kSft ? sft : init;
    rec.next_init = liti(target, rec.merged, cfg.eta);
    if (setup.eval_prompts.size() > 0) {
      rec.sweep = pareto_sweep(target, rec.merged, cfg.eta_grid, spec, setup.eval_prompts, setup.eval, &sft,
                               setup.jobs);
      rec.sft_sweep = &target == &sft ? rec.sweep
                                      : pareto_sweep(sft, rec.merged, cfg.eta_grid, spec, setup.eval_prompts,
                                                     setup.eval, &sft, setup.jobs);
    }
    if (!setup.out_dir.empty())
      detail::write_iteration(setup.out_dir / ("iteration_" + std::to_string(i)), rec, manifest);
    init = rec.next_init;
    out.push_back(std::move(rec));
  }
  if (!setup.out_dir.empty()) {
    if (!out.back().sft_sweep.empty())
      sweep_table(out.back().sft_sweep).write(setup.out_dir / "final_sweep.csv");
    manifest["final_sweep"] = "final_sweep.csv";
    io::atomic_write(setup.out_dir / "manifest.json", manifest.dump(2) + "\n");
  }
  return out;
}

}  // namespace warp

#endif  // WARP_ORCHESTRATOR_HPP_
