#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "homlab/geometry.hpp"
#include "homlab/random_media.hpp"
#include "homlab/stencil.hpp"

namespace homlab {

/// Integer weights handed to the solvers: nearbyint(w * 2^20), round half to even.
constexpr double kWeightScale = 1048576.0;
std::int64_t integerize(double w);

enum class BcMode { full, top_bottom };
enum class SolverKind { brute, mincut, alpha };

std::string to_string(BcMode m);
std::string to_string(SolverKind s);
BcMode bc_mode_from_string(const std::string& s);
SolverKind solver_kind_from_string(const std::string& s);

/// Labels on the unit cells k of a lattice box lo <= k < lo + shape. Cell k
/// is the square [k, k+1)^d with center k + 1/2.
class LabelField {
 public:
  LabelField() = default;
  LabelField(int d, const IVec& lo, const IVec& shape, int num_labels);

  int dim() const { return d_; }
  int num_labels() const { return num_labels_; }
  const IVec& lo() const { return lo_; }
  const IVec& shape() const { return shape_; }
  std::size_t size() const { return labels_.size(); }

  std::size_t index(const IVec& k) const;
  bool contains(const IVec& k) const;
  IVec cell(std::size_t i) const;
  /// Twice the center of cell i.
  IVec center2(std::size_t i) const;

  int label(std::size_t i) const { return labels_[i]; }
  int label(const IVec& k) const { return labels_[index(k)]; }
  /// Throws PreconditionError when the cell is clamped.
  void set_label(std::size_t i, int l);
  /// Fix a label; later set_label calls on this cell fail.
  void clamp(std::size_t i, int l);
  bool clamped(std::size_t i) const { return clamped_[i] != 0; }
  std::span<const std::uint8_t> labels() const { return labels_; }

  bool operator==(const LabelField&) const = default;

  /// d = 2 only: binary PGM, grey level 255 * label / (K - 1), row 0 on top.
  void write_pgm(const std::filesystem::path& path) const;
  /// Any d: raw uint8 labels (first axis fastest) plus path + ".json" header.
  void write_raw(const std::filesystem::path& path) const;

 private:
  int d_ = 0;
  int num_labels_ = 2;
  IVec lo_{};
  IVec shape_{1, 1, 1};
  std::vector<std::uint8_t> labels_;
  std::vector<std::uint8_t> clamped_;
};

/// Unordered cell pair {p, q = p + e} owned by a region.
struct CellPair {
  std::uint32_t p = 0;
  std::uint32_t q = 0;
  std::uint16_t offset = 0;  // index into the stencil
};

struct CellProblemSpec {
  SurfaceTensionField field;
  OrientedCube cube;
  JumpDatum datum;
  BcMode bc = BcMode::full;
  int collar_width = 0;  // 0: 1 for the facet stencil, the stencil reach otherwise
  Stencil stencil = facet_stencil(2);
  SolverKind solver = SolverKind::mincut;
  int max_sweeps = 20;
  bool metric_override = false;
};

/// A cell problem compiled onto the lattice.
///
/// Pair ownership: the pair {p, p+e} belongs to the region when its midpoint
/// does. Free cells: full mode, cells strictly inside with distance > collar
/// to every face; top-bottom mode, cells touched by an owned pair with
/// distance > collar to the two faces normal to nu. Every other cell keeps
/// its rasterized datum label.
struct LatticeProblem {
  OrientedRegion region;
  JumpDatum datum;
  BcMode bc = BcMode::full;
  int collar_width = 1;
  Stencil stencil;
  SurfaceTensionField field;

  LabelField datum_field;  // rasterized datum, clamped cells flagged
  std::vector<std::uint8_t> active;  // cell touched by an owned pair
  std::vector<CellPair> pairs;
  std::vector<std::uint32_t> free_cells;  // increasing cell index
  /// K*K integer costs per pair, entry [lp * K + lq].
  std::vector<std::int64_t> pair_costs;

  int num_labels() const { return datum_field.num_labels(); }
  std::int64_t cost(std::size_t pair, int lp, int lq) const {
    return pair_costs[pair * num_labels() * num_labels() + lp * num_labels() + lq];
  }
  /// Real weight w_e * g(mid, u(q), u(p), nu_e).
  double pair_weight(const CellPair& pr, int lp, int lq) const;
  double normalization() const;  // t^{d-1} of the region
};

int default_collar_width(const Stencil& s);

/// Label every cell of the region's lattice box by the datum at its center.
LabelField rasterize_datum(const OrientedRegion& region, const JumpDatum& datum, int num_labels,
                           int pad);
LabelField rasterize_datum(const OrientedCube& cube, const JumpDatum& datum, int collar_width,
                           int num_labels = 2);

/// Build the lattice problem on an arbitrary oriented region. Throws
/// DomainError if 2 * collar exceeds the region thickness, ConfigError if
/// the collar is narrower than the stencil reach.
LatticeProblem build_problem(const SurfaceTensionField& field, const OrientedRegion& region,
                             const JumpDatum& datum, BcMode bc, int collar_width,
                             const Stencil& stencil);

/// Cell problem on spec.cube. The datum is replaced by its canonical
/// representative (b, a, -nu) when nu is not canonical.
LatticeProblem build_problem(const CellProblemSpec& spec);

/// Indices of clamped cells.
std::vector<std::uint32_t> boundary_collar(const CellProblemSpec& spec);

/// Sum over owned pairs with differing labels of w_e g(mid, u(q), u(p), nu_e),
/// compensated summation in pair order.
double discrete_energy(const LatticeProblem& problem, const LabelField& u);
/// Same sum on the integerized weights.
std::int64_t discrete_energy_int(const LatticeProblem& problem, const LabelField& u);
std::int64_t discrete_energy_int(const LatticeProblem& problem, std::span<const std::uint8_t> u);

/// Energy of u on its whole lattice box: every in-box pair counted once, no
/// region and no clamping.
double discrete_energy(const SurfaceTensionField& field, const LabelField& u,
                       const Stencil& stencil);

}  // namespace homlab
