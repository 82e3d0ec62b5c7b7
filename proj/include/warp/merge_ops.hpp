#ifndef WARP_MERGE_OPS_HPP_
#define WARP_MERGE_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warp/error.hpp"
#include "warp/tensor_store.hpp"

namespace warp {

// Per-group difference theta - init. Stored in double: the difference of two
// floats is exact in double unless their exponents are ~30 binades apart, so
// init + delta reconstructs theta bit-exactly.
struct TaskVector {
  std::vector<std::string> names;
  std::vector<std::vector<std::int64_t>> shapes;
  std::vector<std::vector<double>> groups;
  std::uint64_t init_fingerprint = 0;

  double norm() const {
    double s = 0.0;
    for (const auto& g : groups)
      for (double v : g) s += v * v;
    return std::sqrt(s);
  }
};

inline TaskVector task_vector(const WeightSet& theta, const WeightSet& init) {
  check_compatible(theta, init);
  TaskVector tv;
  tv.init_fingerprint = fingerprint(init);
  for (std::size_t gi = 0; gi < theta.groups.size(); ++gi) {
    const auto& t = theta.groups[gi].data;
    const auto& i0 = init.groups[gi].data;
    std::vector<double> d(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) d[i] = static_cast<double>(t[i]) - static_cast<double>(i0[i]);
    tv.names.push_back(theta.groups[gi].name);
    tv.shapes.push_back(theta.groups[gi].shape);
    tv.groups.push_back(std::move(d));
  }
  return tv;
}

// init + scale * tv.
inline WeightSet apply_task_vector(const WeightSet& init, const TaskVector& tv, double scale = 1.0) {
  require(tv.init_fingerprint == fingerprint(init), ErrorCode::kIncompatible,
          "task vector was taken against a different initialization");
  WeightSet out = init;
  for (std::size_t gi = 0; gi < out.groups.size(); ++gi) {
    auto& o = out.groups[gi].data;
    const auto& d = tv.groups[gi];
    for (std::size_t i = 0; i < o.size(); ++i)
      o[i] = static_cast<float>(static_cast<double>(o[i]) + scale * d[i]);
  }
  return out;
}

namespace detail {

inline void check_unit(double x, const char* what) {
  require(x >= 0.0 && x <= 1.0, ErrorCode::kInvalidArgument,
          std::string(what) + " must be in [0,1], got " + std::to_string(x));
}

// (1-t)*a + t*b elementwise, computed in double and rounded once.
inline WeightSet convex(const WeightSet& a, const WeightSet& b, double t) {
  check_compatible(a, b);
  WeightSet out = a;
  for (std::size_t gi = 0; gi < out.groups.size(); ++gi) {
    auto& o = out.groups[gi].data;
    const auto& bs = b.groups[gi].data;
    for (std::size_t i = 0; i < o.size(); ++i)
      o[i] = static_cast<float>((1.0 - t) * static_cast<double>(o[i]) + t * static_cast<double>(bs[i]));
  }
  return out;
}

struct SlerpCoeffs {
  double c1, c2;
  bool fell_back;
};

inline constexpr double kCollinearTol = 1e-7;

// Coefficients on (delta1, delta2) for one group. Falls back to LERP when
// either vector is zero or the two are numerically collinear.
inline SlerpCoeffs slerp_coeffs(double dot, double n1, double n2, double lambda) {
  if (n1 == 0.0 || n2 == 0.0) return {1.0 - lambda, lambda, true};
  const double c = std::clamp(dot / (n1 * n2), -1.0, 1.0);
  if (std::abs(c) > 1.0 - kCollinearTol) return {1.0 - lambda, lambda, true};
  const double omega = std::acos(c);
  const double s = std::sin(omega);
  return {std::sin((1.0 - lambda) * omega) / s, std::sin(lambda * omega) / s, false};
}

// Group-wise spherical combination of (t1 - base) and (t2 - base), each group
// with its own angle. `base` may be all-zero (full-weight variant).
inline WeightSet slerp_about(const WeightSet& base, const WeightSet& t1, const WeightSet& t2,
                             double lambda) {
  check_compatible(base, t1);
  check_compatible(base, t2);
  WeightSet out = t1;
  std::vector<double> d1, d2;
  for (std::size_t gi = 0; gi < out.groups.size(); ++gi) {
    const auto& b = base.groups[gi].data;
    const auto& a1 = t1.groups[gi].data;
    const auto& a2 = t2.groups[gi].data;
    const std::size_t n = b.size();
    d1.resize(n);
    d2.resize(n);
    double dot = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d1[i] = static_cast<double>(a1[i]) - static_cast<double>(b[i]);
      d2[i] = static_cast<double>(a2[i]) - static_cast<double>(b[i]);
      dot += d1[i] * d2[i];
      s1 += d1[i] * d1[i];
      s2 += d2[i] * d2[i];
    }
    const auto k = slerp_coeffs(dot, std::sqrt(s1), std::sqrt(s2), lambda);
    auto& o = out.groups[gi].data;
    for (std::size_t i = 0; i < n; ++i)
      o[i] = static_cast<float>(static_cast<double>(b[i]) + k.c1 * d1[i] + k.c2 * d2[i]);
  }
  return out;
}

}  // namespace detail

// ema <- (1 - mu) * ema + mu * policy
inline WeightSet ema_update(const WeightSet& ema, const WeightSet& policy, double mu) {
  detail::check_unit(mu, "mu");
  return detail::convex(ema, policy, mu);
}

// (1 - lambda) * theta1 + lambda * theta2, lambda in [0,1].
inline WeightSet lerp(const WeightSet& theta1, const WeightSet& theta2, double lambda) {
  detail::check_unit(lambda, "lambda");
  return detail::convex(theta1, theta2, lambda);
}

// Same formula with lambda in [-1, 2] for extrapolation studies.
inline WeightSet lerp_extrapolate(const WeightSet& theta1, const WeightSet& theta2, double lambda) {
  require(lambda >= -1.0 && lambda <= 2.0, ErrorCode::kInvalidArgument,
          "extrapolation lambda must be in [-1,2], got " + std::to_string(lambda));
  return detail::convex(theta1, theta2, lambda);
}

// Spherical interpolation of the task vectors theta1 - init and theta2 - init,
// applied independently to every tensor group.
inline WeightSet slerp2(const WeightSet& init, const WeightSet& theta1, const WeightSet& theta2,
                        double lambda) {
  detail::check_unit(lambda, "lambda");
  return detail::slerp_about(init, theta1, theta2, lambda);
}

// SLERP on the full weights (no task vectors): the diagnostic variant.
inline WeightSet slerp_full_weights(const WeightSet& theta1, const WeightSet& theta2, double lambda) {
  detail::check_unit(lambda, "lambda");
  return detail::slerp_about(zeros_like(theta1), theta1, theta2, lambda);
}

// Uniform SLERP of M >= 2 weights by left fold: step m merges the running
// result with thetas[m-1] at lambda = 1/m. Order-sensitive.
inline WeightSet slerpm(const WeightSet& init, std::span<const WeightSet> thetas) {
  require(thetas.size() >= 2, ErrorCode::kInvalidArgument,
          "slerpm needs at least 2 weight sets, got " + std::to_string(thetas.size()));
  WeightSet acc = slerp2(init, thetas[0], thetas[1], 0.5);
  for (std::size_t m = 2; m < thetas.size(); ++m)
    acc = slerp2(init, acc, thetas[m], 1.0 / static_cast<double>(m + 1));
  return acc;
}

// Interpolation towards the initialization: (1 - eta) * init + eta * merged.
inline WeightSet liti(const WeightSet& init, const WeightSet& merged, double eta) {
  detail::check_unit(eta, "eta");
  return detail::convex(init, merged, eta);
}

inline WeightSet liti_extrapolate(const WeightSet& init, const WeightSet& merged, double eta) {
  require(eta >= 0.0 && eta <= 2.0, ErrorCode::kInvalidArgument,
          "extrapolation eta must be in [0,2], got " + std::to_string(eta));
  return detail::convex(init, merged, eta);
}

struct GroupAngles {
  std::string name;
  std::optional<double> cos_task;   // delta1 . delta2 / (|delta1| |delta2|)
  std::optional<double> cos_full;   // theta1 . theta2 / (|theta1| |theta2|)
  std::optional<double> task_norm_ratio;  // |delta1| / |delta2|
  std::optional<double> full_norm_ratio;  // |theta1| / |theta2|
};

struct AngleReport {
  std::vector<GroupAngles> groups;
  // Cosines and ratios over the whole concatenated parameter vector.
  std::optional<double> model_cos_task, model_cos_full;
  std::optional<double> model_task_norm_ratio, model_full_norm_ratio;
  // Means over groups with a defined value.
  std::optional<double> mean_cos_task, mean_cos_full;
};

namespace detail {

inline std::optional<double> safe_cos(double dot, double n1, double n2) {
  if (n1 == 0.0 || n2 == 0.0) return std::nullopt;
  return std::clamp(dot / (n1 * n2), -1.0, 1.0);
}

inline std::optional<double> safe_ratio(double a, double b) {
  if (b == 0.0) return std::nullopt;
  return a / b;
}

inline std::optional<double> mean_defined(const std::vector<std::optional<double>>& xs) {
  double s = 0.0;
  int n = 0;
  for (const auto& x : xs)
    if (x) {
      s += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / n;
}

}  // namespace detail

inline AngleReport angle_report(const WeightSet& theta1, const WeightSet& theta2,
                                const WeightSet& init) {
  check_compatible(theta1, init);
  check_compatible(theta2, init);
  AngleReport r;
  double tdot = 0, tn1 = 0, tn2 = 0, fdot = 0, fn1 = 0, fn2 = 0;
  std::vector<std::optional<double>> ct, cf;
  for (std::size_t gi = 0; gi < init.groups.size(); ++gi) {
    const auto& a = theta1.groups[gi].data;
    const auto& b = theta2.groups[gi].data;
    const auto& z = init.groups[gi].data;
    double td = 0, ta = 0, tb = 0, fd = 0, fa = 0, fb = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double d1 = static_cast<double>(a[i]) - z[i];
      const double d2 = static_cast<double>(b[i]) - z[i];
      td += d1 * d2;
      ta += d1 * d1;
      tb += d2 * d2;
      fd += static_cast<double>(a[i]) * b[i];
      fa += static_cast<double>(a[i]) * a[i];
      fb += static_cast<double>(b[i]) * b[i];
    }
    tdot += td, tn1 += ta, tn2 += tb, fdot += fd, fn1 += fa, fn2 += fb;
    GroupAngles g{init.groups[gi].name,
                  detail::safe_cos(td, std::sqrt(ta), std::sqrt(tb)),
                  detail::safe_cos(fd, std::sqrt(fa), std::sqrt(fb)),
                  detail::safe_ratio(std::sqrt(ta), std::sqrt(tb)),
                  detail::safe_ratio(std::sqrt(fa), std::sqrt(fb))};
    ct.push_back(g.cos_task);
    cf.push_back(g.cos_full);
    r.groups.push_back(std::move(g));
  }
  r.model_cos_task = detail::safe_cos(tdot, std::sqrt(tn1), std::sqrt(tn2));
  r.model_cos_full = detail::safe_cos(fdot, std::sqrt(fn1), std::sqrt(fn2));
  r.model_task_norm_ratio = detail::safe_ratio(std::sqrt(tn1), std::sqrt(tn2));
  r.model_full_norm_ratio = detail::safe_ratio(std::sqrt(fn1), std::sqrt(fn2));
  r.mean_cos_task = detail::mean_defined(ct);
  r.mean_cos_full = detail::mean_defined(cf);
  return r;
}

}  // namespace warp

#endif  // WARP_MERGE_OPS_HPP_
