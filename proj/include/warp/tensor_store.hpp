#ifndef WARP_TENSOR_STORE_HPP_
#define WARP_TENSOR_STORE_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "warp/arch.hpp"
#include "warp/error.hpp"

namespace warp {

inline std::int64_t shape_numel(std::span<const std::int64_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

inline std::string shape_string(std::span<const std::int64_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

struct TensorGroup {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::size_t size() const { return data.size(); }
  bool operator==(const TensorGroup&) const = default;
};

struct WeightMeta {
  ArchConfig arch;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  bool operator==(const WeightMeta&) const = default;
};

// A full policy parameterization. Treated as an immutable value: every
// operation below returns a fresh WeightSet.
struct WeightSet {
  WeightMeta meta;
  std::vector<TensorGroup> groups;

  const TensorGroup& group(std::string_view name) const {
    for (const auto& g : groups)
      if (g.name == name) return g;
    fail(ErrorCode::kInvalidArgument, "no group named '" + std::string(name) + "'");
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }

  // Bitwise equality (distinguishes -0.0 from 0.0 and compares NaN payloads).
  bool bit_equal(const WeightSet& o) const { return meta == o.meta && same_tensors(o); }

  // Bitwise tensor equality, ignoring meta.
  bool same_tensors(const WeightSet& o) const {
    if (groups.size() != o.groups.size()) return false;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const auto& a = groups[i];
      const auto& b = o.groups[i];
      if (a.name != b.name || a.shape != b.shape || a.data.size() != b.data.size()) return false;
      if (std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) != 0)
        return false;
    }
    return true;
  }
};

// Zero-filled WeightSet with the schema of `arch`.
inline WeightSet zeros(const ArchConfig& arch) {
  WeightSet w;
  w.meta.arch = arch;
  for (auto& spec : schema(arch)) {
    TensorGroup g{spec.name, spec.shape, {}};
    g.data.assign(static_cast<std::size_t>(shape_numel(spec.shape)), 0.0f);
    w.groups.push_back(std::move(g));
  }
  return w;
}

inline WeightSet zeros_like(const WeightSet& w) {
  WeightSet out;
  out.meta = w.meta;
  for (const auto& g : w.groups) out.groups.push_back({g.name, g.shape, std::vector<float>(g.size(), 0.0f)});
  return out;
}

// Name of the first group at which the two sets disagree, or empty when
// compatible (same names, order and shapes).
inline std::string first_incompatibility(const WeightSet& a, const WeightSet& b) {
  const std::size_t n = std::min(a.groups.size(), b.groups.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ga = a.groups[i];
    const auto& gb = b.groups[i];
    if (ga.name != gb.name)
      return "group #" + std::to_string(i) + " name '" + ga.name + "' vs '" + gb.name + "'";
    if (ga.shape != gb.shape)
      return "group '" + ga.name + "' shape " + shape_string(ga.shape) + " vs " +
             shape_string(gb.shape);
  }
  if (a.groups.size() != b.groups.size()) {
    const auto& longer = a.groups.size() > b.groups.size() ? a : b;
    return "group '" + longer.groups[n].name + "' present in only one set";
  }
  return {};
}

inline bool compatible(const WeightSet& a, const WeightSet& b) {
  return first_incompatibility(a, b).empty();
}

inline void check_compatible(const WeightSet& a, const WeightSet& b) {
  if (auto why = first_incompatibility(a, b); !why.empty()) fail(ErrorCode::kIncompatible, why);
}

// Checks that the group list matches the schema its arch declares.
inline void check_schema(const WeightSet& w) {
  const auto expect = schema(w.meta.arch);
  require(expect.size() == w.groups.size(), ErrorCode::kIncompatible,
          "group count " + std::to_string(w.groups.size()) + " does not match arch schema (" +
              std::to_string(expect.size()) + ")");
  for (std::size_t i = 0; i < expect.size(); ++i) {
    const auto& g = w.groups[i];
    require(g.name == expect[i].name && g.shape == expect[i].shape, ErrorCode::kIncompatible,
            "group '" + g.name + "' " + shape_string(g.shape) + " does not match schema '" +
                expect[i].name + "' " + shape_string(expect[i].shape));
    require(g.data.size() == static_cast<std::size_t>(shape_numel(g.shape)),
            ErrorCode::kShapeMismatch, "group '" + g.name + "' data length mismatch");
  }
}

inline bool all_finite(const WeightSet& w) {
  for (const auto& g : w.groups)
    for (float v : g.data)
      if (!std::isfinite(v)) return false;
  return true;
}

// a*x + y, group-wise. The float product a*x is exact in double, so the single
// rounding at the end is independent of FMA contraction.
inline WeightSet axpy(float a, const WeightSet& x, const WeightSet& y) {
  check_compatible(x, y);
  WeightSet out = y;
  for (std::size_t gi = 0; gi < out.groups.size(); ++gi) {
    const auto& xs = x.groups[gi].data;
    auto& ys = out.groups[gi].data;
    for (std::size_t i = 0; i < ys.size(); ++i)
      ys[i] = static_cast<float>(static_cast<double>(a) * xs[i] + static_cast<double>(ys[i]));
  }
  return out;
}

inline std::map<std::string, double> group_norms(const WeightSet& w) {
  std::map<std::string, double> out;
  for (const auto& g : w.groups) {
    double s = 0.0;
    for (float v : g.data) s += static_cast<double>(v) * v;
    out[g.name] = std::sqrt(s);
  }
  return out;
}

inline double global_norm(const WeightSet& w) {
  double s = 0.0;
  for (const auto& g : w.groups)
    for (float v : g.data) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

// FNV-1a over names, shapes and raw bytes.
inline std::uint64_t fingerprint(const WeightSet& w) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& g : w.groups) {
    eat(g.name.data(), g.name.size());
    eat(g.shape.data(), g.shape.size() * sizeof(std::int64_t));
    eat(g.data.data(), g.data.size() * sizeof(float));
  }
  return h;
}

}  // namespace warp

#endif  // WARP_TENSOR_STORE_HPP_
