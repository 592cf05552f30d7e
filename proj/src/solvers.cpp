#include "homlab/solvers.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "homlab/maxflow.hpp"

namespace homlab {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<int> variable_index(const LatticeProblem& pb) {
  std::vector<int> var(pb.datum_field.size(), -1);
  for (std::size_t v = 0; v < pb.free_cells.size(); ++v) var[pb.free_cells[v]] = static_cast<int>(v);
  return var;
}

SolveResult finish(const LatticeProblem& pb, std::span<const std::uint8_t> labels, SolveStats stats,
                   bool exact) {
  SolveResult r;
  r.argmin = pb.datum_field;
  for (std::uint32_t c : pb.free_cells) r.argmin.set_label(c, labels[c]);
  r.value = discrete_energy(pb, r.argmin);
  r.value_int = discrete_energy_int(pb, r.argmin);
  r.exact = exact;
  r.stats = std::move(stats);
  return r;
}

struct BinaryMove {
  std::vector<std::uint8_t> labels;
  std::int64_t predicted = 0;
  std::int64_t augmentations = 0;
  bool truncated = false;
};

// Each free variable v picks option0[v] (source side) or option1[v] (sink
// side); clamped cells keep their label in `labels`.
BinaryMove binary_move(const LatticeProblem& pb, const std::vector<int>& var,
                       std::span<const std::uint8_t> labels, const std::vector<std::uint8_t>& option0,
                       const std::vector<std::uint8_t>& option1) {
  const std::size_t F = pb.free_cells.size();
  std::vector<std::int64_t> u0(F, 0), u1(F, 0);
  std::int64_t constant = 0;
  MaxFlowGraph graph(static_cast<int>(F));
  BinaryMove out;

  for (std::size_t i = 0; i < pb.pairs.size(); ++i) {
    const CellPair& pr = pb.pairs[i];
    const int vp = var[pr.p], vq = var[pr.q];
    if (vp < 0 && vq < 0) {
      constant += pb.cost(i, labels[pr.p], labels[pr.q]);
    } else if (vq < 0) {
      u0[vp] += pb.cost(i, option0[vp], labels[pr.q]);
      u1[vp] += pb.cost(i, option1[vp], labels[pr.q]);
    } else if (vp < 0) {
      u0[vq] += pb.cost(i, labels[pr.p], option0[vq]);
      u1[vq] += pb.cost(i, labels[pr.p], option1[vq]);
    } else {
      const std::int64_t A = pb.cost(i, option0[vp], option0[vq]);
      const std::int64_t B = pb.cost(i, option0[vp], option1[vq]);
      const std::int64_t C = pb.cost(i, option1[vp], option0[vq]);
      const std::int64_t D = pb.cost(i, option1[vp], option1[vq]);
      // E = A + (C - A) x_p + (D - C) x_q + (B + C - A - D) (1 - x_p) x_q
      constant += A;
      u1[vp] += C - A;
      u1[vq] += D - C;
      std::int64_t lambda = B + C - A - D;
      if (lambda < 0) {
        lambda = 0;
        out.truncated = true;
      }
      graph.add_edge(vp, vq, lambda);
    }
  }
  for (std::size_t v = 0; v < F; ++v) {
    const std::int64_t m = std::min(u0[v], u1[v]);
    constant += m;
    graph.add_terminal(static_cast<int>(v), u1[v] - m, u0[v] - m);
  }
  const std::int64_t flow = graph.solve();
  out.predicted = constant + flow;
  out.augmentations = graph.augmentations();
  out.labels.assign(labels.begin(), labels.end());
  for (std::size_t v = 0; v < F; ++v)
    out.labels[pb.free_cells[v]] = graph.sink_side(static_cast<int>(v)) ? option1[v] : option0[v];
  return out;
}

}  // namespace

SolveResult brute_force_min(const LatticeProblem& pb) {
  const auto t0 = Clock::now();
  const std::size_t F = pb.free_cells.size();
  const int K = pb.num_labels();
  if (static_cast<double>(F) * std::log2(static_cast<double>(K)) > 24.0 + 1e-9)
    throw CapacityError("brute force limited to #free * log2(K) <= 24, got " + std::to_string(F) +
                        " free cells with K = " + std::to_string(K));

  const std::vector<int> var = variable_index(pb);
  // Pairs incident to each variable.
  std::vector<std::vector<std::uint32_t>> incident(F);
  for (std::size_t i = 0; i < pb.pairs.size(); ++i) {
    if (var[pb.pairs[i].p] >= 0) incident[var[pb.pairs[i].p]].push_back(static_cast<std::uint32_t>(i));
    if (var[pb.pairs[i].q] >= 0 && pb.pairs[i].q != pb.pairs[i].p)
      incident[var[pb.pairs[i].q]].push_back(static_cast<std::uint32_t>(i));
  }

  std::vector<std::uint8_t> labels(pb.datum_field.labels().begin(), pb.datum_field.labels().end());
  for (std::uint32_t c : pb.free_cells) labels[c] = 0;
  std::int64_t energy = discrete_energy_int(pb, labels);

  auto relabel = [&](std::size_t v, std::uint8_t l) {
    const std::uint32_t c = pb.free_cells[v];
    std::int64_t delta = 0;
    for (std::uint32_t i : incident[v]) delta -= pb.cost(i, labels[pb.pairs[i].p], labels[pb.pairs[i].q]);
    labels[c] = l;
    for (std::uint32_t i : incident[v]) delta += pb.cost(i, labels[pb.pairs[i].p], labels[pb.pairs[i].q]);
    energy += delta;
  };

  std::int64_t best = energy;
  std::vector<std::uint8_t> best_labels = labels;
  SolveStats stats;
  stats.evaluated = 1;
  for (;;) {
    std::size_t v = F;
    while (v > 0 && labels[pb.free_cells[v - 1]] == K - 1) {
      relabel(v - 1, 0);
      --v;
    }
    if (v == 0) break;
    relabel(v - 1, static_cast<std::uint8_t>(labels[pb.free_cells[v - 1]] + 1));
    ++stats.evaluated;
    if (energy < best) {
      best = energy;
      best_labels = labels;
    }
  }
  stats.iterations = 1;
  stats.wall_ms = elapsed_ms(t0);
  SolveResult r = finish(pb, best_labels, std::move(stats), true);
  if (r.value_int != best) throw std::logic_error("brute force: incremental energy drifted");
  return r;
}

SolveResult mincut_two_label(const LatticeProblem& pb) {
  const auto t0 = Clock::now();
  if (pb.num_labels() != 2) throw DomainError("mincut_two_label needs exactly two labels");
  const std::vector<int> var = variable_index(pb);
  const std::size_t F = pb.free_cells.size();
  std::vector<std::uint8_t> zero(F, 0), one(F, 1);
  BinaryMove mv = binary_move(pb, var, pb.datum_field.labels(), zero, one);
  SolveStats stats;
  stats.iterations = 1;
  stats.augmentations = mv.augmentations;
  stats.wall_ms = elapsed_ms(t0);
  SolveResult r = finish(pb, mv.labels, std::move(stats), true);
  if (r.value_int != mv.predicted) throw std::logic_error("mincut: cut value disagrees with energy");
  return r;
}

SolveResult alpha_expansion(const LatticeProblem& pb, int max_sweeps, bool metric_override) {
  const auto t0 = Clock::now();
  const int K = pb.num_labels();
  if (max_sweeps < 1) throw ConfigError("max_sweeps must be >= 1");
  bool exact = K == 2;
  if (K > 2) {
    const MetricReport mr = metric_check(pb.field, pb.region.d);
    if (!mr.ok && !metric_override)
      throw PreconditionError("label interaction is not a metric: triple (" + std::to_string(mr.worst[0]) +
                              ", " + std::to_string(mr.worst[1]) + ", " + std::to_string(mr.worst[2]) + ")");
  }

  const std::vector<int> var = variable_index(pb);
  const std::size_t F = pb.free_cells.size();
  std::vector<std::uint8_t> labels(pb.datum_field.labels().begin(), pb.datum_field.labels().end());
  for (std::uint32_t c : pb.free_cells) labels[c] = 0;
  std::int64_t energy = discrete_energy_int(pb, labels);

  SolveStats stats;
  std::vector<std::uint8_t> keep(F), alpha(F);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool improved = false;
    for (int a = 0; a < K; ++a) {
      for (std::size_t v = 0; v < F; ++v) {
        keep[v] = labels[pb.free_cells[v]];
        alpha[v] = static_cast<std::uint8_t>(a);
      }
      BinaryMove mv = binary_move(pb, var, labels, keep, alpha);
      stats.augmentations += mv.augmentations;
      if (mv.truncated) exact = false;
      const std::int64_t e = discrete_energy_int(pb, mv.labels);
      if (e < energy) {
        energy = e;
        labels = std::move(mv.labels);
        improved = true;
      }
    }
    ++stats.iterations;
    if (!stats.sweep_energies.empty() && energy > stats.sweep_energies.back())
      throw std::logic_error("alpha-expansion: sweep energy increased");
    stats.sweep_energies.push_back(energy);
    if (!improved) break;
  }
  stats.wall_ms = elapsed_ms(t0);
  return finish(pb, labels, std::move(stats), exact);
}

SolveResult solve(const LatticeProblem& pb, SolverKind kind, int max_sweeps, bool metric_override) {
  switch (kind) {
    case SolverKind::brute: return brute_force_min(pb);
    case SolverKind::mincut: return mincut_two_label(pb);
    case SolverKind::alpha: return alpha_expansion(pb, max_sweeps, metric_override);
  }
  throw ConfigError("unknown solver");
}

SolveResult brute_force_min(const CellProblemSpec& spec) { return brute_force_min(build_problem(spec)); }
SolveResult mincut_two_label(const CellProblemSpec& spec) { return mincut_two_label(build_problem(spec)); }
SolveResult alpha_expansion(const CellProblemSpec& spec) {
  return alpha_expansion(build_problem(spec), spec.max_sweeps, spec.metric_override);
}
SolveResult solve(const CellProblemSpec& spec) {
  return solve(build_problem(spec), spec.solver, spec.max_sweeps, spec.metric_override);
}

MetricReport metric_check(const SurfaceTensionField& field, int d, int samples) {
  MetricReport rep;
  const int K = field.num_labels();
  std::mt19937_64 rng(0x6d657472696331ULL);
  std::uniform_real_distribution<double> pos(-64.0, 64.0);
  std::normal_distribution<double> gauss;
  for (int s = 0; s < samples; ++s) {
    Vec x{}, nu{};
    double n2 = 0.0;
    for (int j = 0; j < d; ++j) {
      x[j] = pos(rng);
      nu[j] = gauss(rng);
      n2 += nu[j] * nu[j];
    }
    for (int j = 0; j < d; ++j) nu[j] /= std::sqrt(n2);
    for (int a = 0; a < K; ++a)
      for (int b = 0; b < K; ++b)
        for (int c = 0; c < K; ++c) {
          if (a == b || a == c || b == c) continue;
          const double direct = field.evaluate(x, a, b, nu);
          const double via = field.evaluate(x, a, c, nu) + field.evaluate(x, c, b, nu);
          const double excess = direct - via;
          if (direct > via * (1.0 + 1e-12) && excess > rep.worst_excess) {
            rep.ok = false;
            rep.worst_excess = excess;
            rep.worst = {a, c, b};
          }
        }
  }
  return rep;
}

}  // namespace homlab
