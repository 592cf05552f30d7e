#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "homlab/lattice_energy.hpp"

using namespace homlab;

namespace {

FieldConfig family(FieldFamily f) {
  FieldConfig c;
  c.family = f;
  return c;
}

CellProblemSpec cell(FieldFamily f, const UnitDirection& nu, double t, BcMode bc = BcMode::full,
                     Stencil st = facet_stencil(2), std::uint64_t seed = 1) {
  CellProblemSpec s;
  s.field = make_field(family(f), seed);
  s.cube = oriented_cube(Vec{}, nu, t);
  s.datum = make_jump_datum(0, 1, nu, Vec{});
  s.bc = bc;
  s.stencil = std::move(st);
  return s;
}

UnitDirection dir(std::int64_t x, std::int64_t y) {
  const std::vector<std::int64_t> k{x, y};
  return UnitDirection::from_integer(k);
}

// Facet energy with g = 1 counted by hand over the whole box.
int count_facets(const LabelField& u) {
  int n = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const IVec k = u.cell(i);
    for (int j = 0; j < 2; ++j) {
      IVec q = k;
      ++q[j];
      if (u.contains(q) && u.label(q) != u.label(k)) ++n;
    }
  }
  return n;
}

}  // namespace

TEST_CASE("integer weights round half to even") {
  CHECK(integerize(1.0) == 1048576);
  CHECK(integerize(0.5 / kWeightScale) == 0);
  CHECK(integerize(1.5 / kWeightScale) == 2);
  CHECK(integerize(2.5 / kWeightScale) == 2);
}

TEST_CASE("whole-box energy examples") {
  const SurfaceTensionField one = make_field(family(FieldFamily::constant), 0);
  const Stencil f = facet_stencil(2);

  LabelField c(2, IVec{}, IVec{2, 2, 1}, 2);
  CHECK(discrete_energy(one, c, f) == 0.0);
  c.set_label(c.index(IVec{0, 0, 0}), 1);
  c.set_label(c.index(IVec{1, 1, 0}), 1);
  CHECK(discrete_energy(one, c, f) == 4.0);
  CHECK(count_facets(c) == 4);

  for (int n : {3, 8, 17}) {
    LabelField u(2, IVec{}, IVec{n, n, 1}, 2);
    for (std::size_t i = 0; i < u.size(); ++i)
      if (u.cell(i)[0] >= n / 2) u.set_label(i, 1);
    CHECK(discrete_energy(one, u, f) == n);
  }
}

TEST_CASE("rasterized datum") {
  const UnitDirection e2 = UnitDirection::axis(2, 1);
  const OrientedCube q = oriented_cube(Vec{}, e2, 4);
  const LabelField u = rasterize_datum(q, make_jump_datum(0, 1, e2, Vec{}), 1);
  for (std::int64_t x = -2; x < 2; ++x)
    for (std::int64_t y = -2; y < 2; ++y) CHECK(u.label(IVec{x, y, 0}) == (y >= 0 ? 0 : 1));

  const UnitDirection d = dir(1, 1);
  const OrientedCube r = oriented_cube(Vec{}, d, 6);
  const LabelField v = rasterize_datum(r, make_jump_datum(0, 1, d, Vec{}), 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const IVec k = v.cell(i);
    const double s = (k[0] + 0.5) + (k[1] + 0.5);
    CHECK(v.label(i) == (s > 0 ? 0 : 1));
  }
  // A cell center on the hyperplane takes b.
  const LabelField w = rasterize_datum(oriented_cube(Vec{0.5, 0.5, 0}, e2, 4),
                                       make_jump_datum(0, 1, e2, Vec{0.5, 0.5, 0}), 1);
  CHECK(w.label(IVec{0, 0, 0}) == 1);
  CHECK(w.label(IVec{0, 1, 0}) == 0);
}

TEST_CASE("boundary collar") {
  const UnitDirection e2 = UnitDirection::axis(2, 1);
  SUBCASE("full: one-cell frame") {
    const CellProblemSpec s = cell(FieldFamily::constant, e2, 8);
    const LatticeProblem p = build_problem(s);
    const auto clamped = boundary_collar(s);
    CHECK(clamped.size() == 28);
    for (std::uint32_t i : clamped) {
      const IVec k = p.datum_field.cell(i);
      CHECK((k[0] == -4 || k[0] == 3 || k[1] == -4 || k[1] == 3));
    }
    CHECK(p.free_cells.size() == 36);
  }
  SUBCASE("top-bottom: top and bottom rows") {
    const CellProblemSpec s = cell(FieldFamily::constant, e2, 8, BcMode::top_bottom);
    const LatticeProblem p = build_problem(s);
    const auto clamped = boundary_collar(s);
    CHECK(clamped.size() == 16);
    for (std::uint32_t i : clamped) {
      const IVec k = p.datum_field.cell(i);
      CHECK((k[1] == -4 || k[1] == 3));
    }
    const LatticeProblem full = build_problem(cell(FieldFamily::constant, e2, 8));
    CHECK(p.free_cells.size() == 48);
    for (std::uint32_t i : full.free_cells)
      CHECK(std::binary_search(p.free_cells.begin(), p.free_cells.end(), i));
  }
  SUBCASE("top-bottom free set contains the full one for oblique directions") {
    for (const UnitDirection& nu : {dir(1, 1), dir(1, 2), dir(3, 4)}) {
      const LatticeProblem a = build_problem(cell(FieldFamily::constant, nu, 12));
      const LatticeProblem b = build_problem(cell(FieldFamily::constant, nu, 12, BcMode::top_bottom));
      CHECK(b.free_cells.size() > a.free_cells.size());
      for (std::uint32_t i : a.free_cells) CHECK(std::binary_search(b.free_cells.begin(), b.free_cells.end(), i));
    }
  }
  SUBCASE("errors") {
    CellProblemSpec thin = cell(FieldFamily::constant, e2, 1);
    CHECK_THROWS_AS(build_problem(thin), DomainError);
    CellProblemSpec narrow = cell(FieldFamily::constant, e2, 16, BcMode::full, crofton_stencil(2, 2));
    narrow.collar_width = 1;
    CHECK_THROWS_AS(build_problem(narrow), ConfigError);
    narrow.collar_width = 0;
    CHECK(build_problem(narrow).collar_width == 2);
  }
}

TEST_CASE("problem energy: flip symmetry and bounds on random labelings") {
  std::mt19937_64 rng(17);
  const FieldFamily fams[] = {FieldFamily::iid_uniform, FieldFamily::stripes, FieldFamily::anisotropic_psi,
                              FieldFamily::product};
  for (int trial = 0; trial < 100; ++trial) {
    const FieldFamily f = fams[trial % 4];
    const UnitDirection nu = trial % 3 == 0 ? dir(1, 2) : trial % 3 == 1 ? dir(0, 1) : dir(2, -1);
    const Stencil st = trial % 2 ? facet_stencil(2) : crofton_stencil(2, 2, make_field(family(f), 0).profile());
    const CellProblemSpec s = cell(f, nu, 10, BcMode::full, st, static_cast<std::uint64_t>(trial));
    const LatticeProblem p = build_problem(s);
    CellProblemSpec s1 = s;
    s1.field = make_field(family(FieldFamily::constant), 0);
    const LatticeProblem p1 = build_problem(s1);

    LabelField u = p.datum_field;
    LabelField u1 = p1.datum_field;
    for (std::uint32_t i : p.free_cells) {
      const int l = static_cast<int>(rng() & 1);
      u.set_label(i, l);
      u1.set_label(i, l);
    }
    // Relabel everything: the free part and the boundary.
    LabelField g(2, u.lo(), u.shape(), 2);
    for (std::size_t i = 0; i < u.size(); ++i) g.set_label(i, 1 - u.label(i));
    CHECK(discrete_energy(p, u) == discrete_energy(p, g));
    CHECK(discrete_energy_int(p, u) == discrete_energy_int(p, g));

    const double e = discrete_energy(p, u), per = discrete_energy(p1, u1);
    const double c = s.field.c();
    CHECK(e <= c * per * (1 + 1e-12));
    CHECK(e >= per / c * (1 - 1e-12));
  }
}

TEST_CASE("gluing across a cut with no differing pairs") {
  const SurfaceTensionField f = make_field(family(FieldFamily::iid_uniform), 3);
  const Stencil st = facet_stencil(2);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    LabelField whole(2, IVec{0, 0, 0}, IVec{12, 9, 1}, 2);
    LabelField left(2, IVec{0, 0, 0}, IVec{6, 9, 1}, 2), right(2, IVec{6, 0, 0}, IVec{6, 9, 1}, 2);
    for (std::size_t i = 0; i < whole.size(); ++i) {
      const IVec k = whole.cell(i);
      const int l = (k[0] == 5 || k[0] == 6) ? 0 : static_cast<int>(rng() & 1);
      whole.set_label(i, l);
      if (k[0] < 6) left.set_label(left.index(k), l);
      else right.set_label(right.index(k), l);
    }
    CHECK(discrete_energy(f, whole, st) ==
          doctest::Approx(discrete_energy(f, left, st) + discrete_energy(f, right, st)).epsilon(1e-14));
  }
}

TEST_CASE("datum energy is close to the flat-interface density") {
  // Facet stencil, g in [1, 2]: t^{1-d} E(datum) within [phi/c (1 - 4/t), c phi (1 + 4/t)].
  for (const UnitDirection& nu : {dir(0, 1), dir(1, 1), dir(1, 2), dir(3, 4)})
    for (int t : {16, 64}) {
      const CellProblemSpec s = cell(FieldFamily::iid_uniform, nu, t);
      const LatticeProblem p = build_problem(s);
      const double phi = facet_stencil(2).anisotropy(nu.vec());
      const double v = discrete_energy(p, p.datum_field) / t;
      const double c = s.field.c();
      CHECK(v >= phi / c * (1 - 4.0 / t));
      CHECK(v <= c * phi * (1 + 4.0 / t));
    }
}

TEST_CASE("canonical datum") {
  const CellProblemSpec s = cell(FieldFamily::iid_uniform, dir(1, -2), 8);
  const LatticeProblem p = build_problem(s);
  CHECK(p.datum.direction.is_canonical());
  CHECK(p.datum.a == 1);
  CHECK(p.datum.b == 0);
}

TEST_CASE("label field export") {
  const auto dirp = std::filesystem::temp_directory_path() / "homlab_test_export";
  std::filesystem::create_directories(dirp);
  LabelField u(2, IVec{}, IVec{3, 2, 1}, 2);
  u.set_label(u.index(IVec{2, 1, 0}), 1);
  u.write_pgm(dirp / "u.pgm");
  std::ifstream in(dirp / "u.pgm", std::ios::binary);
  std::string magic;
  int w = 0, h = 0, mx = 0;
  in >> magic >> w >> h >> mx;
  in.get();
  std::string data(6, '\0');
  in.read(data.data(), 6);
  CHECK(magic == "P5");
  CHECK(w == 3);
  CHECK(h == 2);
  CHECK(mx == 255);
  CHECK(static_cast<unsigned char>(data[2]) == 255);  // row y=1 printed first
  CHECK(static_cast<unsigned char>(data[5]) == 0);

  LabelField v(3, IVec{}, IVec{2, 2, 2}, 3);
  v.set_label(7, 2);
  v.write_raw(dirp / "v.raw");
  CHECK(std::filesystem::file_size(dirp / "v.raw") == 8);
  CHECK(std::filesystem::exists(dirp / "v.raw.json"));
  std::filesystem::remove_all(dirp);

  v.clamp(0, 1);
  CHECK_THROWS_AS(v.set_label(0, 2), PreconditionError);
}
