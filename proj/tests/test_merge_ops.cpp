#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "test_util.hpp"
#include "warp/merge_ops.hpp"

using namespace warp;
using warp::testing::make_set;
using warp::testing::random_like;

namespace {

double norm_of_difference(const WeightSet& a, const WeightSet& b, std::size_t group) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.groups[group].size(); ++i) {
    const double d = static_cast<double>(a.groups[group].data[i]) - b.groups[group].data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

bool same_data(const WeightSet& a, const WeightSet& b) {
  if (!compatible(a, b)) return false;
  for (std::size_t g = 0; g < a.groups.size(); ++g)
    if (std::memcmp(a.groups[g].data.data(), b.groups[g].data.data(), a.groups[g].size() * 4) != 0)
      return false;
  return true;
}

// theta = init + delta for a single 1-D group, with delta given in double.
WeightSet offset(const WeightSet& init, const std::vector<double>& delta) {
  WeightSet out = init;
  for (std::size_t i = 0; i < delta.size(); ++i)
    out.groups[0].data[i] = static_cast<float>(init.groups[0].data[i] + delta[i]);
  return out;
}

}  // namespace

TEST_CASE("task vectors", "[merge_ops]") {
  const WeightSet init = make_set({{1, 1}});
  CHECK(task_vector(init, init).norm() == 0.0);
  const auto tv = task_vector(make_set({{2, 3}}), init);
  CHECK(tv.groups[0] == std::vector<double>{1, 2});

  const WeightSet base = random_like(make_set({std::vector<float>(500), std::vector<float>(17)}), 3);
  const WeightSet theta = axpy(1.0f, random_like(base, 4, 0.01), base);
  CHECK(apply_task_vector(base, task_vector(theta, base)).bit_equal(theta));
  CHECK_THROWS_AS(apply_task_vector(theta, task_vector(theta, base)), Error);
  CHECK_THROWS_AS(task_vector(theta, make_set({{1}})), Error);
}

TEST_CASE("ema_update", "[merge_ops]") {
  const WeightSet ema = random_like(make_set({std::vector<float>(64)}), 1);
  const WeightSet policy = random_like(ema, 2);
  CHECK(ema_update(ema, policy, 0.0).bit_equal(ema));
  CHECK(same_data(ema_update(ema, policy, 1.0), policy));
  CHECK_THROWS_AS(ema_update(ema, policy, -0.01), Error);
  CHECK_THROWS_AS(ema_update(ema, policy, 1.5), Error);

  SECTION("constant policy telescopes to theta + (1-mu)^t (ema0 - theta)") {
    const double mu = 0.01;
    WeightSet e = ema;
    for (int t = 0; t < 10; ++t) e = ema_update(e, policy, mu);
    const double decay = std::pow(1.0 - mu, 10);
    for (std::size_t i = 0; i < e.groups[0].size(); ++i) {
      const double th = policy.groups[0].data[i];
      const double expect = th + decay * (ema.groups[0].data[i] - th);
      CHECK(std::abs(e.groups[0].data[i] - expect) <= 1e-6);
    }
  }
}

TEST_CASE("lerp", "[merge_ops]") {
  const WeightSet a = random_like(make_set({std::vector<float>(40), std::vector<float>(3)}), 5);
  const WeightSet b = random_like(a, 6);
  CHECK(same_data(lerp(a, b, 0.0), a));
  CHECK(same_data(lerp(a, b, 1.0), b));
  for (double lam : {0.0, 0.25, 0.5, 0.9, 1.0}) CHECK(same_data(lerp(a, a, lam), a));
  CHECK_THROWS_AS(lerp(a, b, 1.01), Error);
  CHECK_NOTHROW(lerp_extrapolate(a, b, 2.0));
  CHECK_NOTHROW(lerp_extrapolate(a, b, -1.0));
  CHECK_THROWS_AS(lerp_extrapolate(a, b, 2.5), Error);

  SECTION("orthogonal equal-norm task vectors at lambda = 0.5 shrink to sqrt(0.5)") {
    const WeightSet init = make_set({{0, 0}});
    const auto merged = lerp(make_set({{1, 0}}), make_set({{0, 1}}), 0.5);
    CHECK(norm_of_difference(merged, init, 0) == Catch::Approx(std::sqrt(0.5)).epsilon(1e-7));
  }
}

TEST_CASE("slerp2 endpoints and 2-D oracle", "[merge_ops]") {
  const WeightSet init = random_like(make_set({std::vector<float>(30), std::vector<float>(5)}), 7);
  const WeightSet t1 = axpy(1.0f, random_like(init, 8, 0.1), init);
  const WeightSet t2 = axpy(1.0f, random_like(init, 9, 0.1), init);
  CHECK(same_data(slerp2(init, t1, t2, 0.0), t1));
  CHECK(same_data(slerp2(init, t1, t2, 1.0), t2));
  CHECK_THROWS_AS(slerp2(init, t1, t2, -0.1), Error);
  CHECK_THROWS_AS(slerp2(init, t1, make_set({{1}}), 0.5), Error);

  // init = 0, delta1 = e1, delta2 = e2, Omega = pi/2.
  const auto r = slerp2(make_set({{0, 0}}), make_set({{1, 0}}), make_set({{0, 1}}), 0.5);
  const double expect = std::sin(std::numbers::pi / 4) / std::sin(std::numbers::pi / 2);
  CHECK(r.groups[0].data[0] == Catch::Approx(expect).epsilon(1e-7));
  CHECK(r.groups[0].data[1] == Catch::Approx(expect).epsilon(1e-7));
}

TEST_CASE("slerp2 uses one angle per group", "[merge_ops]") {
  // Group 0 orthogonal, group 1 at 60 degrees: each group keeps its norm.
  const WeightSet init = make_set({{0, 0}, {0, 0}});
  const WeightSet t1 = make_set({{2, 0}, {1, 0}});
  const WeightSet t2 = make_set({{0, 2}, {0.5f, static_cast<float>(std::sqrt(3.0) / 2)}});
  const auto r = slerp2(init, t1, t2, 0.5);
  CHECK(norm_of_difference(r, init, 0) == Catch::Approx(2.0).epsilon(1e-6));
  CHECK(norm_of_difference(r, init, 1) == Catch::Approx(1.0).epsilon(1e-6));
  // Halfway along the arc at 30 degrees in group 1.
  CHECK(r.groups[1].data[0] == Catch::Approx(std::cos(std::numbers::pi / 6)).epsilon(1e-6));
}

TEST_CASE("slerp2 collinear and zero task vectors fall back to lerp", "[merge_ops]") {
  const WeightSet init = make_set({{1, 2, 3}});
  const WeightSet t1 = make_set({{2, 4, 6}});   // delta = (1,2,3)
  const WeightSet t2 = make_set({{3, 6, 9}});   // delta = (2,4,6), collinear
  const auto r = slerp2(init, t1, t2, 0.25);
  const auto l = lerp(t1, t2, 0.25);
  for (int i = 0; i < 3; ++i) CHECK(r.groups[0].data[i] == Catch::Approx(l.groups[0].data[i]).epsilon(1e-7));
  const auto z = slerp2(init, init, t2, 0.5);
  for (int i = 0; i < 3; ++i) CHECK(std::isfinite(z.groups[0].data[i]));
  CHECK(z.groups[0].data[0] == Catch::Approx(2.0).epsilon(1e-7));
  // Antiparallel: sin(Omega) -> 0, also guarded.
  const auto anti = slerp2(init, t1, make_set({{0, 0, 0}}), 0.5);
  CHECK(anti.groups[0].data[0] == Catch::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("SLERP preserves and LERP shrinks equal-norm task vectors", "[merge_ops][property]") {
  Rng rng(99);
  const WeightSet shape = make_set({std::vector<float>(64)});
  for (int trial = 0; trial < 120; ++trial) {
    const WeightSet init = trial % 2 == 0 ? zeros_like(shape) : random_like(shape, 1000 + trial);
    const double l = 0.05 + rng.uniform();
    std::vector<double> d1(64), d2(64);
    double n1 = 0, n2 = 0;
    for (int i = 0; i < 64; ++i) {
      d1[i] = rng.normal();
      d2[i] = rng.normal();
      n1 += d1[i] * d1[i];
      n2 += d2[i] * d2[i];
    }
    for (int i = 0; i < 64; ++i) {
      d1[i] *= l / std::sqrt(n1);
      d2[i] *= l / std::sqrt(n2);
    }
    const WeightSet t1 = offset(init, d1);
    const WeightSet t2 = offset(init, d2);
    const auto angles = angle_report(t1, t2, init);
    const double cos_omega = *angles.groups[0].cos_task;
    for (int k = 1; k <= 9; ++k) {
      const double lam = 0.1 * k;
      const double ns = norm_of_difference(slerp2(init, t1, t2, lam), init, 0);
      CHECK(std::abs(ns - l) <= 1e-5 * l);
      const double nl = norm_of_difference(lerp(t1, t2, lam), init, 0);
      const double law = l * std::sqrt(1.0 - 2.0 * (1.0 - cos_omega) * (lam - lam * lam));
      CHECK(std::abs(nl - law) <= 1e-5 * l);
      CHECK(nl < l);
    }
  }
}

TEST_CASE("slerpm", "[merge_ops]") {
  const WeightSet init = random_like(make_set({std::vector<float>(50), std::vector<float>(4)}), 20);
  std::vector<WeightSet> thetas;
  for (int m = 0; m < 4; ++m) thetas.push_back(axpy(1.0f, random_like(init, 30 + m, 0.2), init));

  CHECK(slerpm(init, std::span(thetas).first(2)).bit_equal(slerp2(init, thetas[0], thetas[1], 0.5)));
  const auto m3 = slerpm(init, std::span(thetas).first(3));
  CHECK(m3.bit_equal(slerp2(init, slerpm(init, std::span(thetas).first(2)), thetas[2], 1.0 / 3.0)));
  CHECK(slerpm(init, thetas).bit_equal(slerp2(init, m3, thetas[3], 0.25)));
  CHECK_THROWS_AS(slerpm(init, std::span(thetas).first(1)), Error);

  SECTION("identical task vectors merge to the shared one") {
    const std::vector<WeightSet> same(3, thetas[0]);
    const auto r = slerpm(init, same);
    const auto tv = task_vector(r, init);
    const auto expect = task_vector(thetas[0], init);
    for (std::size_t g = 0; g < tv.groups.size(); ++g)
      for (std::size_t i = 0; i < tv.groups[g].size(); ++i)
        CHECK(std::abs(tv.groups[g][i] - expect.groups[g][i]) <= 1e-6 * (1.0 + std::abs(expect.groups[g][i])));
  }
}

TEST_CASE("liti", "[merge_ops]") {
  const WeightSet init = random_like(make_set({std::vector<float>(20)}), 40);
  const WeightSet merged = random_like(init, 41);
  CHECK(liti(init, merged, 0.0).bit_equal(init));
  CHECK(same_data(liti(init, merged, 1.0), merged));
  CHECK(liti(init, merged, 0.3).bit_equal(lerp(init, merged, 0.3)));
  CHECK_THROWS_AS(liti(init, merged, 1.2), Error);
  CHECK_NOTHROW(liti_extrapolate(init, merged, 2.0));
  CHECK_THROWS_AS(liti_extrapolate(init, merged, -0.1), Error);
  CHECK_THROWS_AS(liti_extrapolate(init, merged, 2.1), Error);
}

TEST_CASE("angle_report", "[merge_ops]") {
  const WeightSet init = make_set({{0, 0}, {5, 5}});
  const WeightSet t = make_set({{1, 0}, {5, 5}});
  auto r = angle_report(t, t, init);
  CHECK(*r.groups[0].cos_task == Catch::Approx(1.0));
  CHECK_FALSE(r.groups[1].cos_task.has_value());  // zero task vector
  CHECK(*r.mean_cos_task == Catch::Approx(1.0));

  r = angle_report(make_set({{1, 0}, {5, 5}}), make_set({{0, 1}, {5, 5}}), init);
  CHECK(*r.groups[0].cos_task == 0.0);
  CHECK(*r.groups[1].cos_full == Catch::Approx(1.0));

  SECTION("matches a scalar-loop dot-product oracle") {
    const WeightSet base = random_like(make_set({std::vector<float>(37), std::vector<float>(11)}), 50);
    const WeightSet a = axpy(1.0f, random_like(base, 51, 0.3), base);
    const WeightSet b = axpy(1.0f, random_like(base, 52, 0.3), base);
    const auto rep = angle_report(a, b, base);
    for (std::size_t g = 0; g < base.groups.size(); ++g) {
      long double dd = 0, d1 = 0, d2 = 0, fd = 0, f1 = 0, f2 = 0;
      for (std::size_t i = 0; i < base.groups[g].size(); ++i) {
        const long double x = (long double)a.groups[g].data[i] - base.groups[g].data[i];
        const long double y = (long double)b.groups[g].data[i] - base.groups[g].data[i];
        dd += x * y, d1 += x * x, d2 += y * y;
        fd += (long double)a.groups[g].data[i] * b.groups[g].data[i];
        f1 += (long double)a.groups[g].data[i] * a.groups[g].data[i];
        f2 += (long double)b.groups[g].data[i] * b.groups[g].data[i];
      }
      CHECK(std::abs(*rep.groups[g].cos_task - double(dd / std::sqrt(d1 * d2))) <= 1e-6);
      CHECK(std::abs(*rep.groups[g].cos_full - double(fd / std::sqrt(f1 * f2))) <= 1e-6);
      CHECK(std::abs(*rep.groups[g].task_norm_ratio - double(std::sqrt(d1 / d2))) <= 1e-6);
      CHECK(*rep.groups[g].cos_task >= -1.0);
      CHECK(*rep.groups[g].cos_task <= 1.0);
    }
  }
}

TEST_CASE("SLERP on nearly collinear full weights behaves like LERP", "[merge_ops]") {
  // Full weights far from the origin with small perturbations: omega << 1 degree.
  const WeightSet base = random_like(make_set({std::vector<float>(200), std::vector<float>(50)}), 60);
  const WeightSet a = axpy(1.0f, random_like(base, 61, 0.003), base);
  const WeightSet b = axpy(1.0f, random_like(base, 62, 0.003), base);
  const auto rep = angle_report(a, b, zeros_like(base));
  for (const auto& g : rep.groups) REQUIRE(std::acos(*g.cos_task) < std::numbers::pi / 180.0);
  for (double lam : {0.1, 0.5, 0.9}) {
    const auto s = slerp_full_weights(a, b, lam);
    const auto l = lerp(a, b, lam);
    for (std::size_t g = 0; g < s.groups.size(); ++g) {
      const double dev = norm_of_difference(s, l, g);
      double ln = 0;
      for (float v : l.groups[g].data) ln += double(v) * v;
      CHECK(dev <= 1e-4 * std::sqrt(ln));
    }
  }
}
