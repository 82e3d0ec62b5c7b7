#ifndef WARP_OPTIMIZER_HPP_
#define WARP_OPTIMIZER_HPP_

#include <cmath>
#include <vector>

#include "warp/policy_net.hpp"
#include "warp/tensor_store.hpp"

namespace warp {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup_steps = 100;
};

// Adam with linear warmup then a constant rate. step() performs gradient
// ascent on `g` (callers pass the gradient of the objective to maximize).
class Adam {
 public:
  Adam(const WeightSet& w, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& g : w.groups) {
      m_.emplace_back(g.size(), 0.0);
      v_.emplace_back(g.size(), 0.0);
    }
  }

  double rate(long t) const {
    if (cfg_.warmup_steps <= 0) return cfg_.lr;
    return cfg_.lr * std::min(1.0, static_cast<double>(t + 1) / cfg_.warmup_steps);
  }

  void step(WeightSet& w, const GradBuffer<float>& g) {
    const double lr = rate(t_);
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t gi = 0; gi < w.groups.size(); ++gi) {
      auto& p = w.groups[gi].data;
      const auto& gr = g.groups[gi];
      auto& m = m_[gi];
      auto& v = v_[gi];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double x = gr[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * x;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * x * x;
        const double upd = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
        p[i] = static_cast<float>(p[i] + upd);
      }
    }
  }

  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace warp

#endif  // WARP_OPTIMIZER_HPP_
