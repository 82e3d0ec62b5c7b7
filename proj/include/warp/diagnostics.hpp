#ifndef WARP_DIAGNOSTICS_HPP_
#define WARP_DIAGNOSTICS_HPP_

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "warp/io.hpp"
#include "warp/merge_ops.hpp"
#include "warp/orchestrator.hpp"
#include "warp/parallel.hpp"
#include "warp/rl_trainer.hpp"
#include "warp/stats.hpp"

namespace warp {

// ---- merge comparison -------------------------------------------------------

enum class MergeMethod { kSlerp, kLerp, kSlerpFull };

inline std::string to_string(MergeMethod m) {
  switch (m) {
    case MergeMethod::kSlerp: return "slerp";
    case MergeMethod::kLerp: return "lerp";
    case MergeMethod::kSlerpFull: return "slerp_full_weights";
  }
  return "?";
}

inline WeightSet merge_with(MergeMethod m, const WeightSet& init, const WeightSet& t1, const WeightSet& t2,
                            double lambda) {
  switch (m) {
    case MergeMethod::kSlerp: return slerp2(init, t1, t2, lambda);
    case MergeMethod::kLerp: return lerp(t1, t2, lambda);
    case MergeMethod::kSlerpFull: return slerp_full_weights(t1, t2, lambda);
  }
  fail(ErrorCode::kInvalidArgument, "unknown merge method");
}

struct MergeRow {
  MergeMethod method;
  double lambda;
  MeanSe reward, kl, length;
};

// Reward and KL-to-reference of every method at every lambda.
inline std::vector<MergeRow> merge_comparison(const WeightSet& init, const WeightSet& theta1,
                                              const WeightSet& theta2, const std::vector<double>& lambda_grid,
                                              const RewardSpec& spec, const PromptSet& prompts,
                                              const EvalConfig& eval, const WeightSet& reference, int jobs = 1) {
  check_compatible(init, theta1);
  check_compatible(init, theta2);
  const RewardModel rm(spec);
  const MergeMethod methods[] = {MergeMethod::kSlerp, MergeMethod::kLerp, MergeMethod::kSlerpFull};
  std::vector<MergeRow> rows(3 * lambda_grid.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    const auto m = methods[i / lambda_grid.size()];
    const double lam = lambda_grid[i % lambda_grid.size()];
    const WeightSet w = merge_with(m, init, theta1, theta2, lam);
    const WeightSet* refs[] = {&reference};
    const auto e = evaluate(w, refs, rm, prompts, eval);
    rows[i] = {m, lam, e.reward, e.kl[0], e.length};
  });
  return rows;
}

inline io::CsvTable merge_table(const std::vector<MergeRow>& rows) {
  io::CsvTable t({"method", "lambda", "reward", "reward_se", "kl", "kl_se", "mean_length"});
  for (const auto& r : rows)
    t.row().add(to_string(r.method)).add(r.lambda).add(r.reward.mean).add(r.reward.se).add(r.kl.mean).add(r.kl.se)
        .add(r.length.mean);
  return t;
}

// ---- angle / norm diagnostics -----------------------------------------------

inline io::CsvTable angle_table(const AngleReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? io::fmt_double(*v) : std::string("nan"); };
  io::CsvTable t({"group", "cos_task", "cos_full", "task_norm_ratio", "full_norm_ratio"});
  for (const auto& g : r.groups)
    t.row().add(g.name).add(opt(g.cos_task)).add(opt(g.cos_full)).add(opt(g.task_norm_ratio)).add(opt(g.full_norm_ratio));
  t.row().add("model").add(opt(r.model_cos_task)).add(opt(r.model_cos_full)).add(opt(r.model_task_norm_ratio))
      .add(opt(r.model_full_norm_ratio));
  return t;
}

struct Histogram {
  double lo, hi;
  std::vector<long> counts;
  long below = 0, above = 0;
};

inline Histogram histogram(std::span<const double> xs, double lo, double hi, int bins = 32) {
  require(hi > lo && bins >= 1, ErrorCode::kInvalidArgument, "histogram needs hi > lo and bins >= 1");
  Histogram h{lo, hi, std::vector<long>(bins, 0)};
  for (double x : xs) {
    if (x < lo) {
      ++h.below;
    } else if (x > hi) {
      ++h.above;
    } else {
      const int b = std::min(bins - 1, static_cast<int>((x - lo) / (hi - lo) * bins));
      ++h.counts[b];
    }
  }
  return h;
}

inline io::CsvTable histogram_table(const std::vector<std::pair<std::string, Histogram>>& hs) {
  io::CsvTable t({"series", "bin_lo", "bin_hi", "count"});
  for (const auto& [name, h] : hs) {
    const int n = static_cast<int>(h.counts.size());
    for (int b = 0; b < n; ++b)
      t.row().add(name).add(h.lo + (h.hi - h.lo) * b / n).add(h.lo + (h.hi - h.lo) * (b + 1) / n).add(
          static_cast<long long>(h.counts[b]));
  }
  return t;
}

// Per-group cosine histograms over [-1,1] for task vectors and full weights,
// and task-vector norm ratios over [0, 2].
inline io::CsvTable angle_histograms(const std::vector<AngleReport>& reports, int bins = 32) {
  std::vector<double> ct, cf, nr;
  for (const auto& r : reports)
    for (const auto& g : r.groups) {
      if (g.cos_task) ct.push_back(*g.cos_task);
      if (g.cos_full) cf.push_back(*g.cos_full);
      if (g.task_norm_ratio) nr.push_back(*g.task_norm_ratio);
    }
  return histogram_table({{"cos_task", histogram(ct, -1.0, 1.0, bins)},
                          {"cos_full", histogram(cf, -1.0, 1.0, bins)},
                          {"task_norm_ratio", histogram(nr, 0.0, 2.0, bins)}});
}

// ---- diversity ----------------------------------------------------------------

inline double bigram_jaccard(std::span<const int> a, std::span<const int> b) {
  auto bigrams = [](std::span<const int> s) {
    std::set<std::pair<int, int>> out;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) out.insert({s[i], s[i + 1]});
    return out;
  };
  const auto x = bigrams(a), y = bigrams(b);
  if (x.empty() && y.empty()) return std::equal(a.begin(), a.end(), b.begin(), b.end()) ? 1.0 : 0.0;
  std::size_t inter = 0;
  for (const auto& p : x) inter += y.count(p);
  return static_cast<double>(inter) / static_cast<double>(x.size() + y.size() - inter);
}

struct DiversityConfig {
  int k = 4;
  double temperature = 0.9;
  bool greedy = false;
  std::uint64_t seed = 777;
};

struct DiversityRow {
  std::string name;
  MeanSe similarity, kl;
};

// Mean pairwise bigram-Jaccard among K samples per prompt, averaged over
// prompts, plus KL to the reference under the standard evaluation protocol.
inline std::vector<DiversityRow> diversity_probe(const std::vector<std::pair<std::string, WeightSet>>& policies,
                                                 const WeightSet& reference, const PromptSet& prompts,
                                                 const DiversityConfig& dc, const EvalConfig& eval, int jobs = 1) {
  require(dc.k >= 2, ErrorCode::kInvalidArgument, "diversity probe needs K >= 2");
  std::vector<DiversityRow> rows(policies.size());
  parallel_for(policies.size(), jobs, [&](std::size_t pi) {
    const auto& [name, w] = policies[pi];
    const PolicyModel<float> pm(w);
    Roller roller(pm, {});
    const Rng root(dc.seed);
    std::vector<double> sims;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      Rng rng = root.split(i);
      std::vector<std::vector<int>> outs;
      for (int s = 0; s < dc.k; ++s)
        outs.push_back(roller.run(prompts.prompts[i], dc.temperature, rng, dc.greedy).completion.tokens);
      double s = 0.0;
      int n = 0;
      for (int a = 0; a < dc.k; ++a)
        for (int b = a + 1; b < dc.k; ++b, ++n) s += bigram_jaccard(outs[a], outs[b]);
      sims.push_back(s / n);
    }
    rows[pi] = {name, mean_se(sims), kl_estimate(w, reference, prompts, eval.samples_per_prompt, eval.seed)};
  });
  return rows;
}

inline io::CsvTable diversity_table(const std::vector<DiversityRow>& rows) {
  io::CsvTable t({"policy", "similarity", "similarity_se", "kl", "kl_se"});
  for (const auto& r : rows) t.row().add(r.name).add(r.similarity.mean).add(r.similarity.se).add(r.kl.mean).add(r.kl.se);
  return t;
}

inline std::optional<double> diversity_spearman(const std::vector<DiversityRow>& rows) {
  std::vector<double> kl, sim;
  for (const auto& r : rows) {
    kl.push_back(r.kl.mean);
    sim.push_back(r.similarity.mean);
  }
  return spearman(kl, sim);
}

// ---- length bias ----------------------------------------------------------------

struct LengthRow {
  std::string config;
  long step;  // -1 for standalone policies
  double kl, mean_length;
};

inline std::vector<LengthRow> length_report(const std::vector<std::pair<std::string, RunLog>>& logs) {
  std::vector<LengthRow> rows;
  for (const auto& [name, log] : logs)
    for (const auto& r : log.records) rows.push_back({name, r.step, r.kl_sft, r.mean_length});
  return rows;
}

inline io::CsvTable length_table(const std::vector<LengthRow>& rows) {
  io::CsvTable t({"config", "step", "kl", "mean_length"});
  for (const auto& r : rows) t.row().add(r.config).add(static_cast<long long>(r.step)).add(r.kl).add(r.mean_length);
  return t;
}

}  // namespace warp

#endif  // WARP_DIAGNOSTICS_HPP_
