// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include "json.hpp"

#include "homlab/cell_problems.hpp"
#include "homlab/experiments.hpp"
#include "homlab/statistics.hpp"

using namespace homlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

UnitDirection dir(std::initializer_list<std::int64_t> k) {
  std::vector<std::int64_t> v(k);
  return UnitDirection::from_integer(v);
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

const FieldFamily kFamilies[] = {FieldFamily::constant,    FieldFamily::stripes,         FieldFamily::checkerboard,
                                 FieldFamily::iid_uniform, FieldFamily::anisotropic_psi, FieldFamily::product};

// Random two-label cell problem with at most max_free free cells.
CellProblemSpec random_small_spec(std::mt19937_64& rng, std::size_t max_free, int labels) {
  const UnitDirection dirs[] = {dir({0, 1}), dir({1, 0}), dir({1, 1}), dir({1, 2}), dir({2, -1}), dir({0, -1})};
  for (;;) {
    EstimateParams p;
    p.field.family = kFamilies[rng() % 6];
    p.field.num_labels = labels;
    if (labels == 3) {
      // Random metric table with entries in [1, 2].
      std::uniform_real_distribution<double> u(1.0, 2.0);
      const double x = u(rng), y = u(rng), z = u(rng);
      p.field.label_table = {0, x, y, x, 0, z, y, z, 0};
    }
    p.direction = dirs[rng() % 6];
    p.bc = rng() % 2 ? BcMode::top_bottom : BcMode::full;
    p.stencil_radius = rng() % 4 == 0 ? 2 : 1;
    p.a = static_cast<int>(rng() % labels);
    p.b = (p.a + 1 + static_cast<int>(rng() % (labels - 1))) % labels;
    const int t = 3 + static_cast<int>(rng() % 5);
    const Vec center{0.5 * static_cast<double>(rng() % 2), 0.5 * static_cast<double>(rng() % 2), 0};
    p.metric_override = true;
    try {
      CellProblemSpec s = make_cell_spec(p, rng(), t, center);
      const LatticeProblem lp = build_problem(s);
      if (!lp.free_cells.empty() && lp.free_cells.size() <= max_free) return s;
    } catch (const std::exception&) {
      // too thin for the collar; draw again
    }
  }
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(101);
  const auto start = std::chrono::steady_clock::now();
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const LatticeProblem p = build_problem(random_small_spec(rng, 16, 2));
    if (mincut_two_label(p).value_int != brute_force_min(p).value_int) ++mismatches;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && secs < 60.0, fmt("%d/100 mismatches, %.2f s", mismatches, secs)};
}

Outcome multilabel_quality() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  bool monotone = true;
  int n = 0;
  while (n < 20) {
    const CellProblemSpec s = random_small_spec(rng, 9, 3);
    const LatticeProblem p = build_problem(s);
    if (p.free_cells.size() != 9) continue;
    ++n;
    const SolveResult h = alpha_expansion(p, 20, true);
    const SolveResult b = brute_force_min(p);
    worst = std::max(worst, h.value / b.value);
    const auto& e = h.stats.sweep_energies;
    for (std::size_t i = 1; i < e.size(); ++i) monotone = monotone && e[i] <= e[i - 1];
  }
  return {worst <= 1.05 && monotone, fmt("worst ratio %.6f over 20 problems, sweeps %s", worst, monotone ? "monotone" : "not monotone")};
}

Outcome constant_exactness() {
  int bad = 0;
  for (double lambda : {1.0, 1.7}) {
    EstimateParams p;
    p.field.family = FieldFamily::constant;
    p.field.value = lambda;
    p.t_schedule = {8, 16, 32, 64};
    for (int t : p.t_schedule) bad += solve_cell(make_cell_spec(p, 1, t, Vec{})).normalized != lambda;
  }
  return {bad == 0, fmt("%d of 8 values differ from lambda0", bad)};
}

Outcome stripes() {
  EstimateParams p;
  p.field.family = FieldFamily::stripes;
  p.seeds = {1, 2, 3};
  p.t_schedule = {4, 8, 16, 32, 64};
  const EstimateResult e = estimate_ghom(p);
  double dev = 0.0;
  for (const EstimateRecord& r : e.records) dev = std::max(dev, std::abs(r.normalized - 1.5));
  p.solver = SolverKind::brute;
  const double brute = solve_cell(make_cell_spec(p, 1, 4, Vec{})).normalized;
  return {dev <= 1e-9 && std::abs(brute - 1.5) <= 1e-9, fmt("max deviation %.3g, brute force at t=4: %.12g", dev, brute)};
}

Outcome staircase() {
  EstimateParams p;
  p.direction = dir({1, 1});
  const double v = solve_cell(make_cell_spec(p, 1, 128, Vec{})).normalized;
  const double rel = std::abs(v - std::sqrt(2.0)) / std::sqrt(2.0);
  return {rel <= 0.02, fmt("t=128: %.6f vs sqrt(2), relative error %.4f", v, rel)};
}

Outcome anisotropic_gap() {
  EstimateParams p;
  p.field.family = FieldFamily::anisotropic_psi;
  p.direction = dir({1, 1});
  p.stencil_radius = 2;
  const double full = solve_cell(make_cell_spec(p, 1, 128, Vec{})).normalized;
  p.bc = BcMode::top_bottom;
  const double tb = solve_cell_topbottom(make_cell_spec(p, 1, 128, Vec{})).normalized;
  return {full >= 2.1 && tb <= 2.05, fmt("t=128: full %.6f (>= 2.1), top-bottom %.6f (<= 2.05)", full, tb)};
}

Outcome isotropy() {
  bool ok = true;
  std::string detail;
  for (const UnitDirection& nu : {dir({0, 1}), dir({1, 1}), dir({1, 2})}) {
    EstimateParams p;
    p.direction = nu;
    p.stencil_radius = 2;
    const double full = solve_cell(make_cell_spec(p, 1, 128, Vec{})).normalized;
    p.bc = BcMode::top_bottom;
    const double tb = solve_cell_topbottom(make_cell_spec(p, 1, 128, Vec{})).normalized;
    const double gap = std::abs(full - tb) / full;
    ok = ok && gap <= 0.05;
    detail += fmt("%s%s gap %.4f", detail.empty() ? "" : ", ", nu.to_string().c_str(), gap);
  }
  return {ok, detail};
}

std::vector<std::int64_t> cuts(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi, int pieces) {
  // Pieces of length at least 2.
  std::vector<std::int64_t> c{lo};
  for (int k = 1; k < pieces; ++k) {
    const std::int64_t rest = static_cast<std::int64_t>(pieces - k) * 2;
    c.push_back(std::uniform_int_distribution<std::int64_t>(c.back() + 2, hi - rest)(rng));
  }
  c.push_back(hi);
  return c;
}

Outcome subadditivity() {
  std::mt19937_64 rng(303);
  const Stencil f2 = facet_stencil(2), f3 = facet_stencil(3);
  int violations = 0;
  for (int i = 0; i < 50; ++i) {
    const int pieces = rng() % 2 ? 4 : 2;
    const SurfaceTensionField field = make_field(FieldConfig{.family = FieldFamily::iid_uniform}, rng());
    MuResult whole;
    std::int64_t sum = 0;
    if (i % 5 != 4) {
      const UnitDirection dirs[] = {dir({0, 1}), dir({3, 4}), dir({5, -12}), dir({4, 3})};
      const UnitDirection nu = dirs[rng() % 4];
      const std::int64_t lo = std::uniform_int_distribution<std::int64_t>(-20, 20)(rng);
      const std::int64_t len = std::uniform_int_distribution<std::int64_t>(2 * pieces, 12)(rng);
      const auto c = cuts(rng, lo, lo + len, pieces);
      whole = mu_process(IntervalBox{{lo}, {lo + len}}, nu, 0, 1, field, f2);
      for (int k = 0; k < pieces; ++k) sum += mu_process(IntervalBox{{c[k]}, {c[k + 1]}}, nu, 0, 1, field, f2).raw_int;
    } else {
      const UnitDirection nu = rng() % 2 ? dir({0, 0, 1}) : dir({0, 3, 4});
      const std::int64_t x = std::uniform_int_distribution<std::int64_t>(-5, 5)(rng);
      const std::int64_t y = std::uniform_int_distribution<std::int64_t>(-5, 5)(rng);
      const std::int64_t lx = std::uniform_int_distribution<std::int64_t>(4, 6)(rng);
      const std::int64_t ly = std::uniform_int_distribution<std::int64_t>(4, 6)(rng);
      whole = mu_process(IntervalBox{{x, y}, {x + lx, y + ly}}, nu, 0, 1, field, f3);
      const auto cx = cuts(rng, x, x + lx, 2);
      const auto cy = pieces == 4 ? cuts(rng, y, y + ly, 2) : std::vector<std::int64_t>{y, y + ly};
      for (std::size_t a = 0; a + 1 < cx.size(); ++a)
        for (std::size_t b = 0; b + 1 < cy.size(); ++b)
          sum += mu_process(IntervalBox{{cx[a], cy[b]}, {cx[a + 1], cy[b + 1]}}, nu, 0, 1, field, f3).raw_int;
    }
    violations += whole.raw_int > sum;
  }
  return {violations == 0, fmt("%d of 50 boxes violate mu(I) <= sum mu(I_i)", violations)};
}

Outcome stationarity() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<std::int64_t> zi(-64, 64);
  int mismatches = 0, total = 0;
  for (FieldFamily fam : kFamilies) {
    for (int i = 0; i < 100; ++i) {
      EstimateParams p;
      p.field.family = fam;
      p.direction = i % 2 ? dir({1, 2}) : dir({0, 1});
      const std::uint64_t seed = rng();
      const IVec z{zi(rng), zi(rng), 0};
      const Vec zc{static_cast<double>(z[0]), static_cast<double>(z[1]), 0};
      const std::int64_t moved = solve_cell(make_cell_spec(p, seed, 8, zc)).raw_int;
      CellProblemSpec s = make_cell_spec(p, seed, 8, Vec{});
      s.field = s.field.shifted(z);
      mismatches += solve_cell(s).raw_int != moved;
      ++total;
    }
  }
  return {mismatches == 0, fmt("%d of %d (z, seed) pairs differ", mismatches, total)};
}

Outcome symmetry() {
  std::mt19937_64 rng(505);
  int mismatches = 0;
  for (int i = 0; i < 50; ++i) {
    CellProblemSpec s = random_small_spec(rng, 400, 2);
    s.cube = oriented_cube(s.cube.center, s.datum.direction, 4 + static_cast<double>(rng() % 13));
    CellProblemSpec r = s;
    r.datum = make_jump_datum(s.datum.b, s.datum.a, -s.datum.direction, s.datum.anchor);
    r.cube = oriented_cube(s.cube.center, -s.datum.direction, s.cube.side);
    mismatches += solve_any(s).raw_int != solve_any(r).raw_int;
  }
  return {mismatches == 0, fmt("%d of 50 problems differ under (a,b,nu) -> (b,a,-nu)", mismatches)};
}

struct IidRuns {
  EstimateResult centered, shifted;
};

const IidRuns& iid_runs() {
  static const IidRuns runs = [] {
    EstimateParams p;
    p.field.family = FieldFamily::iid_uniform;
    p.t_schedule = {16, 32, 64, 128};
    p.seeds.clear();
    for (std::uint64_t s = 1; s <= 32; ++s) p.seeds.push_back(s);
    p.workers = workers();
    IidRuns r;
    r.centered = estimate_ghom(p);
    r.shifted = estimate_ghom_shifted(Vec{1.0, 0.0, 0}, p);
    return r;
  }();
  return runs;
}

std::vector<double> at_t(const EstimateResult& e, int t) {
  std::vector<double> v;
  for (const EstimateRecord& r : e.records)
    if (r.t == t) v.push_back(r.normalized);
  return v;
}

Outcome shifted_consistency() {
  const auto c = at_t(iid_runs().centered, 128), s = at_t(iid_runs().shifted, 128);
  const double se = std::sqrt(standard_error(c) * standard_error(c) + standard_error(s) * standard_error(s));
  const double diff = std::abs(mean(s) - mean(c));
  return {c.size() == 32 && s.size() == 32 && diff <= 2 * se,
          fmt("t=128, %zu seeds: |%.6f - %.6f| = %.2e, pooled SE %.2e", c.size(), mean(s), mean(c), diff, se)};
}

Outcome ergodicity() {
  const auto a = at_t(iid_runs().centered, 16), b = at_t(iid_runs().centered, 128);
  const double va = sample_variance(a), vb = sample_variance(b);
  return {a.size() == 32 && va > vb, fmt("variance t=16 %.3e, t=128 %.3e", va, vb)};
}

Outcome triangle() {
  EstimateParams p;
  p.field.family = FieldFamily::iid_uniform;
  p.field.num_labels = 3;
  p.field.label_table = {0, 1, 1.5, 1, 0, 1, 1.5, 1, 0};
  p.solver = SolverKind::alpha;
  p.t_schedule = {64};
  p.seeds.clear();
  for (std::uint64_t s = 1; s <= 16; ++s) p.seeds.push_back(s);
  p.workers = workers();
  const TriangleReport r = triangle_audit(p);
  double worst = -1e300;
  for (const TriangleCheck& c : r.checks) worst = std::max(worst, c.lhs - c.rhs - c.tolerance);
  return {r.pass && r.checks.size() == 6,
          fmt("%zu ordered triples, max of g(a,b) - g(a,c) - g(c,b) - tol = %.4f", r.checks.size(), worst)};
}

int shell(const std::string& cmd) {
  const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const char* cli = std::getenv("HOMLAB_CLI");
  if (!cli) return {false, "HOMLAB_CLI is not set"};
  const fs::path dir = fs::temp_directory_path() / ("homlab_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const json cfg = {{"schema", 1},
                    {"name", "determinism"},
                    {"experiment", "estimate"},
                    {"field", {{"family", "iid-uniform"}}},
                    {"geometry", {{"d", 2}, {"directions", {{0, 1}, {1, 2}}}, {"t", {8, 16, 32}}, {"x0", {1, 0}}}},
                    {"seeds", {{"first", 1}, {"count", 8}}},
                    {"bc", {"full", "top_bottom"}},
                    {"audit", {{"shift_tolerance_se", 1000}}}};
  std::ofstream(dir / "config.json") << cfg.dump(2);
  std::string detail;
  bool ok = true;
  std::string csv[2][2];
  int k = 0;
  for (int w : {1, 8}) {
    const fs::path out = dir / ("w" + std::to_string(w));
    const int run = shell(std::string(cli) + " run " + (dir / "config.json").string() + " -q -j " + std::to_string(w) +
                          " -o " + out.string());
    const int replay = shell(std::string(cli) + " replay " + (out / "manifest.json").string() + " -j " +
                             std::to_string(9 - w));
    ok = ok && run == 0 && replay == 0;
    detail += fmt("%sworkers %d: run %d, replay %d", k ? ", " : "", w, run, replay);
    csv[k][0] = strip_wall_ms(slurp(out / "records.csv"));
    csv[k][1] = strip_wall_ms(slurp(out / "shifted.csv"));
    ++k;
  }
  const bool same = !csv[0][0].empty() && csv[0][0] == csv[1][0] && csv[0][1] == csv[1][1];
  detail += same ? ", CSVs identical across worker counts" : ", CSVs differ across worker counts";
  fs::remove_all(dir);
  return {ok && same, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence, mincut vs brute force", oracle_equivalence},
      {"alpha-expansion quality on K=3", multilabel_quality},
      {"constant field exactness", constant_exactness},
      {"stripe field", stripes},
      {"staircase anisotropy", staircase},
      {"anisotropic boundary-condition gap", anisotropic_gap},
      {"isotropy of the two cell formulas", isotropy},
      {"subadditivity of mu", subadditivity},
      {"stationarity", stationarity},
      {"label/normal symmetry", symmetry},
      {"shifted-cell consistency", shifted_consistency},
      {"ergodicity proxy", ergodicity},
      {"triangle inequality", triangle},
      {"determinism of run and replay", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
              << o.detail << ") [" << fmt("%.1f s", secs) << "]" << std::endl;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - failed << "/" << criteria.size() << std::endl;
  return failed ? 1 : 0;
}
