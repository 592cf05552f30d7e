#include "homlab/random_media.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace homlab {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::int64_t floor_mod(std::int64_t a, std::int64_t m) {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

struct Range {
  double lo;
  double hi;
};

Range spatial_range(const FieldConfig& c, FieldFamily family) {
  switch (family) {
    case FieldFamily::constant:
    case FieldFamily::anisotropic_psi:
      return {c.value, c.value};
    case FieldFamily::stripes:
    case FieldFamily::checkerboard:
      return {std::min(c.v0, c.v1), std::max(c.v0, c.v1)};
    case FieldFamily::iid_uniform:
      return {c.lo, c.hi};
    case FieldFamily::product:
      break;
  }
  throw ConfigError("product field cannot be nested");
}

}  // namespace

std::string to_string(FieldFamily f) {
  switch (f) {
    case FieldFamily::constant: return "constant";
    case FieldFamily::stripes: return "stripes";
    case FieldFamily::checkerboard: return "checkerboard";
    case FieldFamily::iid_uniform: return "iid-uniform";
    case FieldFamily::anisotropic_psi: return "anisotropic-psi";
    case FieldFamily::product: return "product";
  }
  return "?";
}

FieldFamily field_family_from_string(const std::string& s) {
  for (auto f : {FieldFamily::constant, FieldFamily::stripes, FieldFamily::checkerboard,
                 FieldFamily::iid_uniform, FieldFamily::anisotropic_psi, FieldFamily::product})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown field family '" + s + "'");
}

double DirectionProfile::operator()(const Vec& nu) const {
  // Normals passed here are unit vectors, so the isotropic profile is 1.
  if (coeff == 0.0) return 1.0;
  const double s = nu[0] * nu[0] + nu[1] * nu[1] + nu[2] * nu[2];
  return std::sqrt(coeff * nu[0] * nu[0] + s);
}

double cell_uniform(std::uint64_t seed, const IVec& cell) {
  std::uint64_t h = splitmix(seed);
  for (int i = 0; i < kMaxDim; ++i) h = splitmix(h ^ static_cast<std::uint64_t>(cell[i]));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

SurfaceTensionField::SurfaceTensionField(FieldConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  const FieldConfig& c = config_;
  const int k = c.num_labels;
  if (k < 2 || k > 16) throw ConfigError("num_labels must be in [2, 16]");
  if (c.period < 1) throw ConfigError("stripe period must be >= 1");
  if (c.axis < 0 || c.axis >= kMaxDim) throw ConfigError("stripe axis out of range");
  if (c.lo > c.hi) throw ConfigError("iid-uniform needs lo <= hi");
  if (!(c.psi_coeff >= 0.0)) throw ConfigError("psi coefficient must be nonnegative");
  if (c.base == FieldFamily::product) throw ConfigError("product base must be a plain family");

  const bool with_psi = c.family == FieldFamily::anisotropic_psi || c.family == FieldFamily::product;
  profile_.coeff = with_psi ? c.psi_coeff : 0.0;

  Range r = spatial_range(c, c.family == FieldFamily::product ? c.base : c.family);
  if (!(r.lo > 0.0)) throw ConfigError("field values must be positive");
  if (with_psi) r.hi *= std::sqrt(c.psi_coeff + 1.0);

  if (!c.label_table.empty()) {
    if (c.label_table.size() != static_cast<std::size_t>(k * k))
      throw ConfigError("label_table must have num_labels^2 entries");
    double tlo = std::numeric_limits<double>::infinity(), thi = 0.0;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        if (a == b) continue;
        const double v = c.label_table[a * k + b];
        if (v != c.label_table[b * k + a]) throw ConfigError("label_table must be symmetric");
        if (!(v > 0.0)) throw ConfigError("label_table entries must be positive");
        tlo = std::min(tlo, v);
        thi = std::max(thi, v);
      }
    r.lo *= tlo;
    r.hi *= thi;
  }

  const double needed = std::max({1.0, r.hi, 1.0 / r.lo});
  if (c.c == 0.0) {
    c_ = needed;
  } else {
    if (c.c < 1.0) throw ConfigError("ellipticity constant c must be >= 1");
    if (r.hi > c.c || r.lo < 1.0 / c.c)
      throw ConfigError("field values leave the admissible range [1/c, c]");
    c_ = c.c;
  }
}

double SurfaceTensionField::base_factor(FieldFamily family, const IVec& cell) const {
  const FieldConfig& c = config_;
  switch (family) {
    case FieldFamily::constant:
    case FieldFamily::anisotropic_psi:
      return c.value;
    case FieldFamily::stripes: {
      const std::int64_t r = floor_mod(cell[c.axis], c.period);
      return 2 * r < c.period ? c.v0 : c.v1;
    }
    case FieldFamily::checkerboard:
      return floor_mod(cell[0] + cell[1] + cell[2], 2) == 0 ? c.v0 : c.v1;
    case FieldFamily::iid_uniform:
      return c.lo + (c.hi - c.lo) * cell_uniform(seed_, cell);
    case FieldFamily::product:
      break;
  }
  return 0.0;
}

double SurfaceTensionField::spatial_factor(const Vec& x) const {
  IVec cell{};
  for (int i = 0; i < kMaxDim; ++i) cell[i] = static_cast<std::int64_t>(std::floor(x[i])) + offset_[i];
  const FieldFamily f = config_.family == FieldFamily::product ? config_.base : config_.family;
  return base_factor(f, cell);
}

double SurfaceTensionField::label_factor(int a, int b) const {
  if (config_.label_table.empty()) return 1.0;
  return config_.label_table[a * config_.num_labels + b];
}

double SurfaceTensionField::evaluate(const Vec& x, int a, int b, const Vec& nu) const {
  if (a == b) throw DomainError("surface tension is only defined for a != b");
  if (a < 0 || b < 0 || a >= num_labels() || b >= num_labels())
    throw DomainError("label out of range");
  return spatial_factor(x) * profile_(nu) * label_factor(a, b);
}

SurfaceTensionField SurfaceTensionField::shifted(const IVec& z) const {
  SurfaceTensionField f = *this;
  for (int i = 0; i < kMaxDim; ++i) f.offset_[i] += z[i];
  return f;
}

SurfaceTensionField SurfaceTensionField::shifted(std::span<const double> z) const {
  IVec iz{};
  for (std::size_t i = 0; i < z.size() && i < kMaxDim; ++i) {
    if (z[i] != std::nearbyint(z[i])) throw DomainError("shift vector must be integer");
    iz[i] = static_cast<std::int64_t>(z[i]);
  }
  return shifted(iz);
}

SurfaceTensionField make_field(const FieldConfig& config, std::uint64_t seed) {
  return SurfaceTensionField(config, seed);
}

}  // namespace homlab
