#ifndef WARP_STATS_HPP_
#define WARP_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "warp/error.hpp"

namespace warp {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  std::size_t n = 0;
};

inline MeanSe mean_se(std::span<const double> xs) {
  MeanSe r;
  r.n = xs.size();
  if (xs.empty()) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / xs.size();
  if (xs.size() < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / (xs.size() - 1) / xs.size());
  return r;
}

// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::kInvalidArgument, "correlation needs equal-length inputs");
  if (x.size() < 2) return std::nullopt;
  const double mx = mean_se(x).mean, my = mean_se(y).mean;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks(x), ry = ranks(y);
  return pearson(rx, ry);
}

// Reward as a piecewise-linear function of KL through measured points.
struct FrontPoint {
  double kl, reward;
};

class Front {
 public:
  explicit Front(std::vector<FrontPoint> pts) : pts_(std::move(pts)) {
    require(!pts_.empty(), ErrorCode::kInvalidArgument, "empty front");
    std::stable_sort(pts_.begin(), pts_.end(), [](auto& a, auto& b) { return a.kl < b.kl; });
  }

  double min_kl() const { return pts_.front().kl; }
  double max_kl() const { return pts_.back().kl; }
  const std::vector<FrontPoint>& points() const { return pts_; }

  // nullopt outside [min_kl, max_kl].
  std::optional<double> at(double kl) const {
    if (kl < min_kl() || kl > max_kl()) return std::nullopt;
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      const auto& a = pts_[i - 1];
      const auto& b = pts_[i];
      if (kl <= b.kl) {
        if (b.kl == a.kl) return std::max(a.reward, b.reward);
        const double t = (kl - a.kl) / (b.kl - a.kl);
        return a.reward + t * (b.reward - a.reward);
      }
    }
    return pts_.back().reward;
  }

 private:
  std::vector<FrontPoint> pts_;
};

struct Dominance {
  int wins = 0;
  int points = 0;
  double fraction() const { return points ? static_cast<double>(wins) / points : 0.0; }
};

// Compares `a` against `b` at `n` evenly spaced KL values spanning their
// overlap (both ends included); a wins a point where its reward is >= b's.
inline Dominance dominance(const Front& a, const Front& b, int n = 20) {
  Dominance d;
  const double lo = std::max(a.min_kl(), b.min_kl());
  const double hi = std::min(a.max_kl(), b.max_kl());
  if (!(hi > lo) || n < 2) return d;
  for (int i = 0; i < n; ++i) {
    const double kl = lo + (hi - lo) * i / (n - 1);
    const auto ra = a.at(kl), rb = b.at(kl);
    if (!ra || !rb) continue;
    ++d.points;
    if (*ra >= *rb) ++d.wins;
  }
  return d;
}

inline Dominance operator+(Dominance x, const Dominance& y) {
  x.wins += y.wins;
  x.points += y.points;
  return x;
}

}  // namespace warp

#endif  // WARP_STATS_HPP_
