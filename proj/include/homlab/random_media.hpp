#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "homlab/geometry.hpp"

namespace homlab {

enum class FieldFamily { constant, stripes, checkerboard, iid_uniform, anisotropic_psi, product };

std::string to_string(FieldFamily f);
FieldFamily field_family_from_string(const std::string& s);

/// psi(nu) = sqrt(coeff * nu_1^2 + 1) for unit nu; coeff = 0 is the isotropic profile.
struct DirectionProfile {
  double coeff = 0.0;

  double operator()(const Vec& nu) const;
  bool isotropic() const { return coeff == 0.0; }
  bool operator==(const DirectionProfile&) const = default;
};

struct FieldConfig {
  FieldFamily family = FieldFamily::constant;
  double value = 1.0;  // constant and anisotropic-psi spatial factor
  int period = 2;      // stripes
  int axis = 0;        // stripes
  double v0 = 1.0;     // stripes, checkerboard
  double v1 = 2.0;
  double lo = 1.0;  // iid-uniform
  double hi = 2.0;
  double psi_coeff = 8.0;                    // anisotropic-psi, product
  FieldFamily base = FieldFamily::iid_uniform;  // product
  int num_labels = 2;
  std::vector<double> label_table;  // K*K symmetric multipliers; empty = all 1
  double c = 0.0;                   // ellipticity constant; 0 picks the smallest valid one

  bool operator==(const FieldConfig&) const = default;
};

/// Stationary surface tension g(omega, x, a, b, nu) = lambda(x) * psi(nu) * T[a][b].
///
/// The spatial factor is piecewise constant on unit cells; random families
/// hash (seed, cell) so a shift by z is an offset of the counter and the
/// stationarity identity holds bit for bit.
class SurfaceTensionField {
 public:
  SurfaceTensionField() = default;
  SurfaceTensionField(FieldConfig config, std::uint64_t seed);

  double evaluate(const Vec& x, int a, int b, const Vec& nu) const;
  double spatial_factor(const Vec& x) const;
  double direction_factor(const Vec& nu) const { return profile_(nu); }
  double label_factor(int a, int b) const;

  SurfaceTensionField shifted(const IVec& z) const;
  /// Throws DomainError for non-integer components.
  SurfaceTensionField shifted(std::span<const double> z) const;

  const FieldConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const IVec& offset() const { return offset_; }
  double c() const { return c_; }
  int num_labels() const { return config_.num_labels; }
  const DirectionProfile& profile() const { return profile_; }

  bool operator==(const SurfaceTensionField& o) const {
    return config_ == o.config_ && seed_ == o.seed_ && offset_ == o.offset_;
  }

 private:
  double base_factor(FieldFamily family, const IVec& cell) const;

  FieldConfig config_;
  std::uint64_t seed_ = 0;
  IVec offset_{};
  double c_ = 1.0;
  DirectionProfile profile_;
};

SurfaceTensionField make_field(const FieldConfig& config, std::uint64_t seed);

/// Uniform double in [0, 1) from a counter-based hash of (seed, cell).
double cell_uniform(std::uint64_t seed, const IVec& cell);

}  // namespace homlab
