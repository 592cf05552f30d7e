#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "homlab/geometry.hpp"

using namespace homlab;

namespace {

// Reflection through the bisector of nu and e_d, applied to x.
Vec reference_frame_apply(const Vec& nu, const Vec& x, int d) {
  Vec w = nu;
  w[d - 1] += 1.0;
  const double ww = dot(w, w, d);
  Vec out{};
  if (ww < 1e-300) {
    for (int i = 0; i < d; ++i) out[i] = -x[i];
    return out;
  }
  const double s = 2.0 * dot(x, w, d) / ww;
  for (int i = 0; i < d; ++i) out[i] = s * w[i] - x[i];
  return out;
}

Vec random_unit(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n;
  Vec v{};
  double r = 0;
  do {
    for (int i = 0; i < d; ++i) v[i] = n(rng);
    r = norm(v, d);
  } while (r < 1e-6);
  for (int i = 0; i < d; ++i) v[i] /= r;
  return v;
}

UnitDirection dir(std::initializer_list<std::int64_t> k) {
  std::vector<std::int64_t> v(k);
  return UnitDirection::from_integer(v);
}

}  // namespace

TEST_CASE("orientation matrix special cases") {
  SUBCASE("nu = -e_d gives -Id") {
    for (int d : {2, 3}) {
      const Mat o = orientation_matrix(UnitDirection::axis(d, d - 1, true));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) CHECK(o(i, j) == (i == j ? -1.0 : 0.0));
    }
  }
  SUBCASE("d=2, e_1 swaps coordinates") {
    const Mat o = orientation_matrix(UnitDirection::axis(2, 0));
    CHECK(o(0, 0) == doctest::Approx(0.0));
    CHECK(o(0, 1) == doctest::Approx(1.0));
    CHECK(o(1, 0) == doctest::Approx(1.0));
    CHECK(o(1, 1) == doctest::Approx(0.0));
  }
  SUBCASE("d=2, e_2 negates the first coordinate") {
    const Mat o = orientation_matrix(UnitDirection::axis(2, 1));
    const Vec y = o.apply(Vec{3.0, 5.0, 0.0});
    CHECK(y[0] == doctest::Approx(-3.0));
    CHECK(y[1] == doctest::Approx(5.0));
  }
  SUBCASE("non-unit input") {
    const std::vector<double> v{1.0, 1.0};
    CHECK_THROWS_AS(orientation_matrix(v), DomainError);
  }
}

TEST_CASE("orientation matrix: orthogonal, O e_d = nu, matches reference on 1000 random directions") {
  std::mt19937_64 rng(11);
  for (int d : {2, 3})
    for (int trial = 0; trial < 1000; ++trial) {
      const Vec nu = random_unit(rng, d);
      const Mat o = orientation_matrix(std::span<const double>(nu.data(), d));
      double worst = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += o(k, i) * o(k, j);
          worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
      CHECK(worst < 1e-10);
      const Vec ed = o.column(d - 1);
      for (int i = 0; i < d; ++i) CHECK(std::abs(ed[i] - nu[i]) < 1e-10);
      Vec x{};
      for (int i = 0; i < d; ++i) x[i] = static_cast<double>(i + 1) - 0.3;
      const Vec want = reference_frame_apply(nu, x, d), got = o.apply(x);
      for (int i = 0; i < d; ++i) CHECK(std::abs(want[i] - got[i]) < 1e-9);
    }
}

TEST_CASE("rational snap and canonical form") {
  const std::vector<double> v{0.6, 0.8};
  const UnitDirection nu = UnitDirection::snap(v);
  CHECK(nu.integer()[0] == 3);
  CHECK(nu.integer()[1] == 4);
  CHECK(nu.is_rational());
  CHECK(nu.integer_norm() == 5);
  CHECK_FALSE(dir({1, 1}).is_rational());
  CHECK(dir({2, 4}) == dir({1, 2}));
  CHECK(dir({1, 2}).is_canonical());
  CHECK_FALSE(dir({1, -2}).is_canonical());
  CHECK((-dir({1, -2})).is_canonical());
  const std::vector<double> irr{1.0, std::sqrt(2.0)};
  const UnitDirection s = UnitDirection::snap(irr);
  for (int i = 0; i < 2; ++i) CHECK(std::abs(s.integer()[i]) <= UnitDirection::kSnapLimit);
  CHECK(std::abs(s[1] / s[0] - std::sqrt(2.0)) < 1e-7);
}

TEST_CASE("rational direction scale") {
  CHECK(rational_direction_scale(UnitDirection::axis(2, 1)) == 1);
  CHECK(rational_direction_scale(dir({3, 4})) == 5);
  CHECK_THROWS_AS(rational_direction_scale(dir({1, 1})), DomainError);

  // Smallest m with m O (z, 0) integral, by direct search on the float frame.
  for (const UnitDirection& nu : {dir({3, 4}), dir({5, 12}), dir({4, -3}), dir({2, 3, 6}), dir({1, 4, 8})}) {
    const int d = nu.dim();
    const Mat o = orientation_matrix(nu);
    std::int64_t m = 1;
    for (;; ++m) {
      bool ok = true;
      for (int j = 0; j < d - 1 && ok; ++j)
        for (int i = 0; i < d && ok; ++i) {
          const double v = m * o(i, j);
          ok = std::abs(v - std::nearbyint(v)) < 1e-9;
        }
      if (ok) break;
    }
    CHECK(rational_direction_scale(nu) == m);
  }
}

TEST_CASE("oriented cube") {
  const OrientedCube unit = oriented_cube(Vec{}, UnitDirection::axis(2, 1), 1.0);
  CHECK(unit.contains(Vec{0.49, 0.49, 0}));
  CHECK_FALSE(unit.contains(Vec{0.51, 0.0, 0}));

  const UnitDirection diag = dir({1, 1});
  const OrientedCube rot = oriented_cube(Vec{}, diag, 2.0);
  for (const Vec& c : rot.corners()) {
    CHECK(std::abs(norm(c, 2) - std::sqrt(2.0)) < 1e-12);
    CHECK((std::abs(c[0]) < 1e-12 || std::abs(c[1]) < 1e-12));
  }
  const OrientedCube q1 = oriented_cube(Vec{}, diag, 1.0);
  Vec in{}, out{};
  for (int i = 0; i < 2; ++i) {
    in[i] = 0.49 * diag[i];
    out[i] = 0.51 * diag[i];
  }
  CHECK(q1.contains(in));
  CHECK_FALSE(q1.contains(out));
  CHECK_THROWS_AS(oriented_cube(Vec{}, diag, 0.0), DomainError);
  CHECK_THROWS_AS(oriented_cube(Vec{}, diag, -1.0), DomainError);
}

TEST_CASE("cube membership symmetric under point reflection") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec nu = random_unit(rng, 2);
    const UnitDirection n = UnitDirection::snap(std::span<const double>(nu.data(), 2));
    const Vec c{u(rng), u(rng), 0};
    const OrientedCube q = oriented_cube(c, n, 3.0), qm = oriented_cube(c, -n, 3.0);
    for (int k = 0; k < 20; ++k) {
      const Vec x{u(rng), u(rng), 0};
      const Vec xr{2 * c[0] - x[0], 2 * c[1] - x[1], 0};
      CHECK(q.contains(x) == qm.contains(xr));
    }
  }
}

TEST_CASE("jump datum") {
  const JumpDatum j = make_jump_datum(0, 1, UnitDirection::axis(2, 1), Vec{});
  CHECK(j.eval(Vec{5, 0.1, 0}) == 0);
  CHECK(j.eval(Vec{5, -0.1, 0}) == 1);
  const JumpDatum k = make_jump_datum(2, 1, dir({1, 2}), Vec{0.5, 0.5, 0});
  CHECK(k.eval(Vec{0.5, 0.5, 0}) == 1);
  const JumpDatum m = make_jump_datum(0, 1, dir({1, -2}), Vec{});
  const JumpDatum c = m.canonical();
  CHECK(c.a == 1);
  CHECK(c.b == 0);
  CHECK(c.direction.is_canonical());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 200; ++i) {
    const Vec x{u(rng), u(rng), 0};
    if (std::abs(dot(x, m.direction.vec(), 2)) > 1e-9) CHECK(m.eval(x) == c.eval(x));
  }
}

TEST_CASE("hyperplane distance constant") {
  const std::vector<double> e1{1, 0}, e2{0, 1};
  CHECK(hyperplane_distance_constant(e1, e2) == doctest::Approx(std::sqrt(5.0)));
  const std::vector<double> h{0.5, std::sqrt(3.0) / 2};
  CHECK(hyperplane_distance_constant(e1, h) == doctest::Approx(std::sqrt(1.0 + 16.0 / 3.0)));
  CHECK(hyperplane_distance_constant(e1, h) == doctest::Approx(2.517).epsilon(1e-3));
  const std::vector<double> m1{-1, 0};
  CHECK_THROWS_AS(hyperplane_distance_constant(e1, e1), DomainError);
  CHECK_THROWS_AS(hyperplane_distance_constant(e1, m1), DomainError);
}

TEST_CASE("oriented interval regions") {
  const UnitDirection e2 = UnitDirection::axis(2, 1);
  SUBCASE("unit square for e_2") {
    const OrientedRegion r = oriented_interval_region(IntervalBox{{0}, {1}}, e2);
    // Frame reflects x1: in-plane coordinate is -x1 in [0,1), normal coordinate in (-1/2, 1/2).
    CHECK(r.contains2(IVec{-1, 0, 0}));
    CHECK_FALSE(r.contains2(IVec{1, 0, 0}));
    CHECK_FALSE(r.contains2(IVec{-1, 1, 0}));
  }
  SUBCASE("thickness follows the longest side") {
    const OrientedRegion r = oriented_interval_region(IntervalBox{{0}, {2}}, e2);
    CHECK(r.hi2[1] - r.lo2[1] == 4);
  }
  SUBCASE("translation") {
    const UnitDirection nu = dir({3, 4});
    const IntervalBox box{{0}, {2}};
    const std::vector<std::int64_t> z{3};
    const OrientedRegion a = oriented_interval_region(box.translated(z), nu);
    const OrientedRegion b = oriented_interval_region(box, nu);
    const IVec s = lattice_shift(nu, z);
    CHECK(s[0] == 5 * 3 * -4 / 5);
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::int64_t> u(-60, 60);
    for (int i = 0; i < 2000; ++i) {
      const IVec p{u(rng), u(rng), 0};
      const IVec q{p[0] - 2 * s[0], p[1] - 2 * s[1], 0};
      CHECK(a.contains2(p) == b.contains2(q));
    }
  }
  SUBCASE("partition pieces are disjoint and inside the parent") {
    const UnitDirection nu = dir({3, 4});
    const OrientedRegion whole = oriented_interval_region(IntervalBox{{0}, {4}}, nu);
    const OrientedRegion p1 = oriented_interval_region(IntervalBox{{0}, {2}}, nu);
    const OrientedRegion p2 = oriented_interval_region(IntervalBox{{2}, {4}}, nu);
    for (std::int64_t x = -50; x <= 50; ++x)
      for (std::int64_t y = -50; y <= 50; ++y) {
        const IVec p{x, y, 0};
        const bool a = p1.contains2(p), b = p2.contains2(p);
        CHECK_FALSE((a && b));
        if (a || b) CHECK(whole.contains2(p));
      }
  }
  SUBCASE("degenerate box") {
    CHECK_THROWS_AS(oriented_interval_region(IntervalBox{{1}, {1}}, e2), DomainError);
    CHECK_THROWS_AS(oriented_interval_region(IntervalBox{{0}, {1}}, dir({1, 1})), DomainError);
  }
}

TEST_CASE("cube region matches cube membership at lattice points") {
  const UnitDirection nu = dir({1, 2});
  const OrientedCube q = oriented_cube(Vec{0.5, -1.0, 0}, nu, 6.0);
  const OrientedRegion r = cube_region(q);
  for (std::int64_t x = -20; x <= 20; ++x)
    for (std::int64_t y = -20; y <= 20; ++y) {
      const Vec p{x / 2.0, y / 2.0, 0};
      Vec rel{p[0] - q.center[0], p[1] - q.center[1], 0};
      bool on_face = false;
      for (int j = 0; j < 2; ++j) on_face = on_face || std::abs(std::abs(dot(rel, q.frame.column(j), 2)) - 3.0) < 1e-9;
      if (!on_face) CHECK(r.contains2(IVec{x, y, 0}) == q.contains(p));
    }
}
