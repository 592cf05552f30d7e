#include "homlab/lattice_energy.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace homlab {

std::int64_t integerize(double w) { return static_cast<std::int64_t>(std::nearbyint(w * kWeightScale)); }

std::string to_string(BcMode m) { return m == BcMode::full ? "full" : "top_bottom"; }

std::string to_string(SolverKind s) {
  switch (s) {
    case SolverKind::brute: return "brute";
    case SolverKind::mincut: return "mincut";
    case SolverKind::alpha: return "alpha";
  }
  return "?";
}

BcMode bc_mode_from_string(const std::string& s) {
  if (s == "full") return BcMode::full;
  if (s == "top_bottom" || s == "top-bottom") return BcMode::top_bottom;
  throw ConfigError("unknown bc mode '" + s + "'");
}

SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "brute") return SolverKind::brute;
  if (s == "mincut") return SolverKind::mincut;
  if (s == "alpha") return SolverKind::alpha;
  throw ConfigError("unknown solver '" + s + "'");
}

// ---------------------------------------------------------------------------

LabelField::LabelField(int d, const IVec& lo, const IVec& shape, int num_labels)
    : d_(d), num_labels_(num_labels), lo_(lo), shape_(shape) {
  std::size_t n = 1;
  for (int i = 0; i < kMaxDim; ++i) {
    if (i >= d) {
      lo_[i] = 0;
      shape_[i] = 1;
    }
    if (shape_[i] <= 0) throw DomainError("label field shape must be positive");
    n *= static_cast<std::size_t>(shape_[i]);
  }
  labels_.assign(n, 0);
  clamped_.assign(n, 0);
}

bool LabelField::contains(const IVec& k) const {
  for (int i = 0; i < kMaxDim; ++i)
    if (k[i] < lo_[i] || k[i] >= lo_[i] + shape_[i]) return false;
  return true;
}

std::size_t LabelField::index(const IVec& k) const {
  if (!contains(k)) throw DomainError("cell outside the label field");
  return static_cast<std::size_t>((k[0] - lo_[0]) +
                                  shape_[0] * ((k[1] - lo_[1]) + shape_[1] * (k[2] - lo_[2])));
}

IVec LabelField::cell(std::size_t i) const {
  IVec k{};
  auto r = static_cast<std::int64_t>(i);
  for (int j = 0; j < kMaxDim; ++j) {
    k[j] = lo_[j] + r % shape_[j];
    r /= shape_[j];
  }
  return k;
}

IVec LabelField::center2(std::size_t i) const {
  IVec k = cell(i);
  for (int j = 0; j < d_; ++j) k[j] = 2 * k[j] + 1;
  return k;
}

void LabelField::set_label(std::size_t i, int l) {
  if (clamped_[i]) throw PreconditionError("cannot relabel a clamped cell");
  if (l < 0 || l >= num_labels_) throw DomainError("label out of range");
  labels_[i] = static_cast<std::uint8_t>(l);
}

void LabelField::clamp(std::size_t i, int l) {
  if (l < 0 || l >= num_labels_) throw DomainError("label out of range");
  labels_[i] = static_cast<std::uint8_t>(l);
  clamped_[i] = 1;
}

void LabelField::write_pgm(const std::filesystem::path& path) const {
  if (d_ != 2) throw DomainError("PGM export needs a 2-d label field");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "P5\n" << shape_[0] << ' ' << shape_[1] << "\n255\n";
  const int den = std::max(1, num_labels_ - 1);
  for (std::int64_t r = shape_[1] - 1; r >= 0; --r)
    for (std::int64_t c = 0; c < shape_[0]; ++c) {
      const int l = labels_[static_cast<std::size_t>(c + shape_[0] * r)];
      out.put(static_cast<char>(255 * l / den));
    }
}

void LabelField::write_raw(const std::filesystem::path& path) const {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(labels_.data()), static_cast<std::streamsize>(labels_.size()));
  }
  nlohmann::json h;
  h["dim"] = d_;
  h["num_labels"] = num_labels_;
  h["lo"] = std::vector<std::int64_t>(lo_.begin(), lo_.begin() + d_);
  h["shape"] = std::vector<std::int64_t>(shape_.begin(), shape_.begin() + d_);
  h["dtype"] = "uint8";
  h["order"] = "first-axis-fastest";
  std::ofstream(path.string() + ".json") << h.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

double LatticeProblem::pair_weight(const CellPair& pr, int lp, int lq) const {
  const IVec c2 = datum_field.center2(pr.p);
  const IVec& e = stencil.offsets[pr.offset];
  Vec mid{};
  for (int j = 0; j < region.d; ++j) mid[j] = 0.5 * static_cast<double>(c2[j] + e[j]);
  return stencil.weights[pr.offset] * field.evaluate(mid, lq, lp, stencil.normals[pr.offset]);
}

double LatticeProblem::normalization() const {
  const double t = 0.5 * static_cast<double>(region.hi2[region.d - 1] - region.lo2[region.d - 1]);
  return std::pow(t, region.d - 1);
}

int default_collar_width(const Stencil& s) { return s.radius == 1 ? 1 : s.reach(); }

LabelField rasterize_datum(const OrientedRegion& region, const JumpDatum& datum, int num_labels,
                           int pad) {
  auto [lo, hi] = region.bounding_box();
  IVec shape{};
  for (int i = 0; i < region.d; ++i) {
    lo[i] -= pad;
    hi[i] += pad;
    shape[i] = hi[i] - lo[i];
  }
  LabelField u(region.d, lo, shape, num_labels);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const IVec c2 = u.center2(i);
    Vec x{};
    for (int j = 0; j < region.d; ++j) x[j] = 0.5 * static_cast<double>(c2[j]);
    u.set_label(i, datum.eval(x));
  }
  return u;
}

LabelField rasterize_datum(const OrientedCube& cube, const JumpDatum& datum, int collar_width,
                           int num_labels) {
  return rasterize_datum(cube_region(cube), datum, num_labels, collar_width);
}

LatticeProblem build_problem(const SurfaceTensionField& field, const OrientedRegion& region,
                             const JumpDatum& datum, BcMode bc, int collar_width,
                             const Stencil& stencil) {
  const int d = region.d;
  if (stencil.d != d) throw DomainError("stencil dimension does not match the region");
  if (datum.direction.dim() != d) throw DomainError("datum dimension does not match the region");
  const int K = field.num_labels();
  if (datum.a == datum.b || datum.a < 0 || datum.b < 0 || datum.a >= K || datum.b >= K)
    throw DomainError("datum labels must be distinct labels of the field");
  if (collar_width < stencil.reach())
    throw ConfigError("collar width must be at least the stencil reach");
  for (int j = 0; j < d; ++j) {
    if (bc == BcMode::top_bottom && j + 1 < d) continue;
    if (4 * static_cast<std::int64_t>(collar_width) > region.hi2[j] - region.lo2[j])
      throw DomainError("collar is thicker than the region");
  }

  LatticeProblem pb;
  pb.region = region;
  pb.datum = datum;
  pb.bc = bc;
  pb.collar_width = collar_width;
  pb.stencil = stencil;
  pb.field = field;
  pb.datum_field = rasterize_datum(region, datum, K, stencil.reach());
  LabelField& u = pb.datum_field;
  const std::size_t n = u.size();
  if (n >= (std::size_t{1} << 31)) throw CapacityError("lattice box too large");

  pb.active.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const IVec k = u.cell(i);
    const IVec c2 = u.center2(i);
    for (std::size_t e = 0; e < stencil.size(); ++e) {
      IVec kq = k;
      IVec mid2 = c2;
      for (int j = 0; j < d; ++j) {
        kq[j] += stencil.offsets[e][j];
        mid2[j] += stencil.offsets[e][j];
      }
      if (!u.contains(kq) || !region.contains2(mid2)) continue;
      const std::size_t q = u.index(kq);
      pb.pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(q),
                          static_cast<std::uint16_t>(e)});
      pb.active[i] = pb.active[q] = 1;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    bool free = pb.active[i] != 0;
    const IVec c2 = u.center2(i);
    for (int j = 0; j < d && free; ++j) {
      if (bc == BcMode::top_bottom && j + 1 < d) continue;
      free = region.deep_axis2(c2, j, collar_width);
    }
    if (free)
      pb.free_cells.push_back(static_cast<std::uint32_t>(i));
    else
      u.clamp(i, u.label(i));
  }

  pb.pair_costs.assign(pb.pairs.size() * K * K, 0);
  for (std::size_t p = 0; p < pb.pairs.size(); ++p)
    for (int a = 0; a < K; ++a)
      for (int b = 0; b < K; ++b)
        if (a != b) pb.pair_costs[(p * K + a) * K + b] = integerize(pb.pair_weight(pb.pairs[p], a, b));
  return pb;
}

namespace {

struct CanonicalSpec {
  OrientedCube cube;
  JumpDatum datum;
};

CanonicalSpec canonicalize(const CellProblemSpec& spec) {
  CanonicalSpec c{spec.cube, spec.datum};
  if (!spec.datum.direction.is_canonical()) {
    c.datum = spec.datum.canonical();
    if (spec.cube.direction == spec.datum.direction)
      c.cube = oriented_cube(spec.cube.center, c.datum.direction, spec.cube.side);
  }
  return c;
}

}  // namespace

LatticeProblem build_problem(const CellProblemSpec& spec) {
  const CanonicalSpec c = canonicalize(spec);
  const int w = spec.collar_width > 0 ? spec.collar_width : default_collar_width(spec.stencil);
  return build_problem(spec.field, cube_region(c.cube), c.datum, spec.bc, w, spec.stencil);
}

std::vector<std::uint32_t> boundary_collar(const CellProblemSpec& spec) {
  const LatticeProblem pb = build_problem(spec);
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < pb.datum_field.size(); ++i)
    if (pb.active[i] && pb.datum_field.clamped(i)) out.push_back(static_cast<std::uint32_t>(i));
  return out;
}

namespace {

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void check_shape(const LatticeProblem& pb, std::size_t n) {
  if (n != pb.datum_field.size()) throw DomainError("label field does not match the problem");
}

}  // namespace

double discrete_energy(const LatticeProblem& pb, const LabelField& u) {
  check_shape(pb, u.size());
  CompensatedSum s;
  for (const CellPair& pr : pb.pairs) {
    const int lp = u.label(pr.p), lq = u.label(pr.q);
    if (lp != lq) s.add(pb.pair_weight(pr, lp, lq));
  }
  return s.value();
}

std::int64_t discrete_energy_int(const LatticeProblem& pb, std::span<const std::uint8_t> u) {
  check_shape(pb, u.size());
  std::int64_t s = 0;
  for (std::size_t p = 0; p < pb.pairs.size(); ++p) s += pb.cost(p, u[pb.pairs[p].p], u[pb.pairs[p].q]);
  return s;
}

std::int64_t discrete_energy_int(const LatticeProblem& pb, const LabelField& u) {
  return discrete_energy_int(pb, u.labels());
}

double discrete_energy(const SurfaceTensionField& field, const LabelField& u, const Stencil& stencil) {
  const int d = u.dim();
  CompensatedSum s;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const IVec k = u.cell(i);
    for (std::size_t e = 0; e < stencil.size(); ++e) {
      IVec kq = k;
      for (int j = 0; j < d; ++j) kq[j] += stencil.offsets[e][j];
      if (!u.contains(kq)) continue;
      const int lp = u.label(i), lq = u.label(kq);
      if (lp == lq) continue;
      Vec mid{};
      for (int j = 0; j < d; ++j) mid[j] = 0.5 * static_cast<double>(2 * k[j] + 1 + stencil.offsets[e][j]);
      s.add(stencil.weights[e] * field.evaluate(mid, lq, lp, stencil.normals[e]));
    }
  }
  return s.value();
}

}  // namespace homlab
