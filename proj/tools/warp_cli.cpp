// warp: command-line driver for the SFT / RL / merging lab.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "warp/warp.hpp"

namespace fs = std::filesystem;
using namespace warp;

namespace {

constexpr const char* kOutputRootEnv = "WARP_OUTPUT_ROOT";

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int jobs = 0;
  std::string sft_path;
};

struct Context {
  ExperimentConfig cfg;
  fs::path root;
  int jobs = 1;
  std::string sft_path;

  PromptSet train_prompts() const { return cfg.train_prompts(); }
  PromptSet eval_prompts() const { return cfg.eval_prompts(); }

  WeightSet sft() const {
    if (!sft_path.empty()) return load_checkpoint(sft_path);
    std::cerr << "building sft policy (" << cfg.sft.cfg.steps << " steps)\n";
    return make_sft(cfg.arch, cfg.sft.corpus_seed, cfg.sft.cfg.steps, cfg.sft.cfg);
  }

  fs::path out(const std::string& name) const { return root / name; }
};

Context resolve(const Globals& g) {
  Context c;
  c.cfg = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) c.cfg.seed = *g.seed;
  std::string root = c.cfg.output_dir;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) root = env;
  if (!g.out_dir.empty()) root = g.out_dir;
  c.cfg.output_dir = root;
  c.root = root;
  c.jobs = g.jobs > 0 ? g.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  c.sft_path = g.sft_path;
  c.cfg.validate();
  fs::create_directories(c.root);
  io::atomic_write(c.out("resolved_config.json"), to_json(c.cfg).dump(2) + "\n");
  return c;
}

std::string quote(std::string s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += (ch == '\n' ? ' ' : ch);
  }
  return out;
}

int report(std::string_view code, const std::string& msg, int status) {
  std::cerr << "error code=" << code << " msg=\"" << quote(msg) << "\"\n";
  return status;
}

void print_record(const RunRecord& r) {
  std::cout << "step " << r.step << " reward " << io::fmt_double(r.reward) << " kl " << io::fmt_double(r.kl_sft)
            << " len " << io::fmt_double(r.mean_length) << "\n";
}

// ---- subcommands -------------------------------------------------------------

void cmd_sft(const Context& c) {
  const auto w = c.sft();
  const auto held = heldout_corpus(c.cfg.arch, c.cfg.sft.corpus_seed, c.cfg.sft.cfg);
  const double ce = cross_entropy(w, held);
  const double ce0 = cross_entropy(init_policy(c.cfg.arch, c.cfg.sft.cfg.init_seed), held);
  save_checkpoint(w, c.out("sft.ckpt"));
  const nlohmann::ordered_json j = {{"checkpoint", "sft.ckpt"},
                                    {"fingerprint", fingerprint(w)},
                                    {"heldout_ce", ce},
                                    {"heldout_ce_init", ce0}};
  io::atomic_write(c.out("sft.json"), j.dump(2) + "\n");
  std::cout << "sft heldout_ce " << io::fmt_double(ce) << " (init " << io::fmt_double(ce0) << ")\n";
}

void cmd_train(const Context& c, const std::string& init_path) {
  const auto sft = c.sft();
  const auto init = init_path.empty() ? sft : load_checkpoint(init_path);
  TrainSetup ts{&sft, c.eval_prompts(), c.cfg.eval, print_record};
  const auto r = train_run(init, c.cfg.train_config(), c.cfg.reward_spec(), c.train_prompts(), ts);
  save_checkpoint(r.final, c.out("final.ckpt"));
  save_checkpoint(r.ema, c.out("ema.ckpt"));
  io::atomic_write(c.out("log.jsonl"), r.log.to_jsonl());
  if (r.log.abort)
    fail(ErrorCode::kNonFinite,
         "non-finite " + r.log.abort->quantity + " at step " + std::to_string(r.log.abort->step));
  std::cout << "trained " << r.steps_done << " steps" << (r.log.hit_kl_ceiling ? " (kl ceiling)" : "") << "\n";
}

void cmd_warp(const Context& c) {
  const auto sft = c.sft();
  save_checkpoint(sft, c.out("sft.ckpt"));
  WarpSetup setup{c.eval_prompts(), c.cfg.eval, c.jobs, c.root};
  const auto its = run_warp(sft, c.cfg.warp_config(), c.cfg.reward_spec(), c.train_prompts(), setup);
  for (const auto& it : its) {
    std::cout << "iteration " << it.index << ":";
    for (const auto& p : it.sweep)
      std::cout << " eta=" << io::fmt_double(p.eta) << " kl=" << io::fmt_double(p.kl.mean)
                << " r=" << io::fmt_double(p.reward.mean);
    std::cout << "\n";
  }
}

void cmd_merge(const Context& c, const std::string& init_path, const std::vector<std::string>& inputs,
               const std::string& method, double lambda, const std::string& out_name) {
  std::vector<WeightSet> ws;
  for (const auto& p : inputs) ws.push_back(load_checkpoint(p));
  auto need_two = [&] {
    require(ws.size() == 2, ErrorCode::kInvalidArgument,
            "method " + method + " needs exactly 2 inputs, got " + std::to_string(ws.size()));
  };
  auto need_init = [&] {
    require(!init_path.empty(), ErrorCode::kInvalidArgument, "method " + method + " needs --init");
    return load_checkpoint(init_path);
  };
  WeightSet merged;
  if (method == "slerp") {
    need_two();
    merged = slerp2(need_init(), ws[0], ws[1], lambda);
  } else if (method == "lerp") {
    need_two();
    merged = lerp(ws[0], ws[1], lambda);
  } else if (method == "slerp-full") {
    need_two();
    merged = slerp_full_weights(ws[0], ws[1], lambda);
  } else {
    merged = slerpm(need_init(), ws);
  }
  save_checkpoint(merged, c.out(out_name));
  std::cout << out_name << " " << fingerprint(merged) << "\n";
}

void cmd_liti(const Context& c, const std::string& init_path, const std::string& merged_path, double eta,
              const std::string& out_name) {
  const auto w = eta <= 1.0 ? liti(load_checkpoint(init_path), load_checkpoint(merged_path), eta)
                            : liti_extrapolate(load_checkpoint(init_path), load_checkpoint(merged_path), eta);
  save_checkpoint(w, c.out(out_name));
  std::cout << out_name << " " << fingerprint(w) << "\n";
}

void cmd_sweep(const Context& c, const std::string& init_path, const std::string& merged_path,
               std::vector<double> grid) {
  if (grid.empty()) grid = c.cfg.warp.eta_grid;
  const auto init = load_checkpoint(init_path);
  const auto sft = c.sft_path.empty() ? init : load_checkpoint(c.sft_path);
  const auto pts = pareto_sweep(init, load_checkpoint(merged_path), grid, c.cfg.reward_spec(), c.eval_prompts(),
                                c.cfg.eval, &sft, c.jobs);
  const auto t = sweep_table(pts);
  t.write(c.out("sweep.csv"));
  std::cout << t.str();
}

void cmd_diag(const Context& c, const std::string& init_path, const std::string& a_path, const std::string& b_path) {
  const auto init = load_checkpoint(init_path);
  const auto a = load_checkpoint(a_path), b = load_checkpoint(b_path);
  const auto sft = c.sft_path.empty() ? init : load_checkpoint(c.sft_path);
  const auto rep = angle_report(a, b, init);
  angle_table(rep).write(c.out("angles.csv"));
  angle_histograms({rep}).write(c.out("angle_histograms.csv"));
  const auto rows = merge_comparison(init, a, b, c.cfg.diag.lambda_grid, c.cfg.reward_spec(), c.eval_prompts(),
                                     c.cfg.eval, sft, c.jobs);
  merge_table(rows).write(c.out("merge_comparison.csv"));
  DiversityConfig dc;
  dc.k = c.cfg.diag.diversity_k;
  const auto div = diversity_probe({{"a", a}, {"b", b}, {"slerp", slerp2(init, a, b, 0.5)}}, sft, c.eval_prompts(), dc,
                                   c.cfg.eval, c.jobs);
  diversity_table(div).write(c.out("diversity.csv"));
  std::cout << angle_table(rep).str();
}

void cmd_eval(const Context& c, const std::string& policy_path) {
  const auto w = load_checkpoint(policy_path);
  const auto sft = c.sft_path.empty() ? c.sft() : load_checkpoint(c.sft_path);
  const WeightSet* refs[] = {&sft};
  const auto e = evaluate(w, refs, RewardModel(c.cfg.reward_spec()), c.eval_prompts(), c.cfg.eval);
  const nlohmann::ordered_json j = {{"policy", policy_path},
                                    {"reward", e.reward.mean},
                                    {"reward_se", e.reward.se},
                                    {"kl", e.kl[0].mean},
                                    {"kl_se", e.kl[0].se},
                                    {"mean_length", e.length.mean},
                                    {"n", e.reward.n}};
  io::atomic_write(c.out("eval.json"), j.dump(2) + "\n");
  std::cout << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"warp: EMA-anchored RL, spherical merging and LITI on a toy policy"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "output root (overrides $WARP_OUTPUT_ROOT and the config)");
  app.add_option("--jobs", g.jobs, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--sft", g.sft_path, "SFT checkpoint (rebuilt from the config when omitted)");

  std::string init, merged, policy, out_name, method = "slerp", a_path, b_path;
  std::vector<std::string> inputs;
  std::vector<double> grid;
  double lambda = 0.5, eta = 0.3;

  auto* sft = app.add_subcommand("sft", "supervised fine-tuning on the synthetic corpus");
  auto* train = app.add_subcommand("train", "one KL-regularized REINFORCE run");
  train->add_option("--init", init, "initial checkpoint (default: SFT)");
  auto* warp_cmd = app.add_subcommand("warp", "iterated EMA / SLERP / LITI");
  auto* merge = app.add_subcommand("merge", "merge checkpoints");
  merge->add_option("--init", init, "shared initialization");
  merge->add_option("--inputs", inputs, "checkpoints to merge")->required()->expected(2, -1);
  merge->add_option("--method", method, "slerp|lerp|slerpm|slerp-full")
      ->check(CLI::IsMember({"slerp", "lerp", "slerpm", "slerp-full"}));
  merge->add_option("--lambda", lambda, "interpolation coefficient")->check(CLI::Range(0.0, 1.0));
  merge->add_option("--out", out_name, "output file name under the output root")->default_val("merged.ckpt");
  auto* liti_cmd = app.add_subcommand("liti", "interpolate towards the initialization");
  liti_cmd->add_option("--init", init)->required();
  liti_cmd->add_option("--merged", merged)->required();
  liti_cmd->add_option("--eta", eta)->check(CLI::Range(0.0, 2.0));
  liti_cmd->add_option("--out", out_name)->default_val("liti.ckpt");
  auto* sweep = app.add_subcommand("sweep", "KL-reward front of liti(init, merged, eta)");
  sweep->add_option("--init", init)->required();
  sweep->add_option("--merged", merged)->required();
  sweep->add_option("--eta-grid", grid, "comma-separated eta values")->delimiter(',');
  auto* diag = app.add_subcommand("diag", "angles, merge comparison and diversity of two runs");
  diag->add_option("--init", init)->required();
  diag->add_option("--a", a_path)->required();
  diag->add_option("--b", b_path)->required();
  auto* eval = app.add_subcommand("eval", "reward and KL of one checkpoint");
  eval->add_option("--policy", policy)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), 2);
  }

  try {
    const Context c = resolve(g);
    if (*sft) cmd_sft(c);
    if (*train) cmd_train(c, init);
    if (*warp_cmd) cmd_warp(c);
    if (*merge) cmd_merge(c, init, inputs, method, lambda, out_name);
    if (*liti_cmd) cmd_liti(c, init, merged, eta, out_name);
    if (*sweep) cmd_sweep(c, init, merged, grid);
    if (*diag) cmd_diag(c, init, a_path, b_path);
    if (*eval) cmd_eval(c, policy);
  } catch (const Error& e) {
    return report(to_string(e.code()), e.detail(), 1);
  } catch (const std::exception& e) {
    return report("internal", e.what(), 1);
  }
  return 0;
}
