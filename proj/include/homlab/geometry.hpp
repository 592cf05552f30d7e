#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homlab/errors.hpp"

namespace homlab {

constexpr int kMaxDim = 3;

using Vec = std::array<double, kMaxDim>;
using IVec = std::array<std::int64_t, kMaxDim>;

double dot(const Vec& x, const Vec& y, int d);
double norm(const Vec& x, int d);

/// Dense d x d matrix, row-major, d <= 3.
struct Mat {
  int d = 0;
  std::array<std::array<double, kMaxDim>, kMaxDim> a{};

  double operator()(int i, int j) const { return a[i][j]; }
  Vec column(int j) const;
  Vec apply(const Vec& x) const;
  Vec apply_transpose(const Vec& x) const;
};

/// Unit normal stored in its rational-snapped form: a primitive integer
/// vector k (gcd 1, |k_i| <= 10^4) together with k/|k| in floating point.
class UnitDirection {
 public:
  static constexpr std::int64_t kSnapLimit = 10000;

  UnitDirection() = default;

  /// Direction of an integer vector; the vector is reduced by its gcd.
  static UnitDirection from_integer(std::span<const std::int64_t> k);
  /// Nearest snapped direction to a real vector (need not be normalized).
  static UnitDirection snap(std::span<const double> v);
  static UnitDirection axis(int d, int j, bool negative = false);

  int dim() const { return d_; }
  const Vec& vec() const { return unit_; }
  const IVec& integer() const { return k_; }
  double operator[](int i) const { return unit_[i]; }

  /// True when k/|k| is rational, i.e. |k|^2 is a perfect square.
  bool is_rational() const { return norm_int_ > 0; }
  /// |k| when rational, 0 otherwise.
  std::int64_t integer_norm() const { return norm_int_; }

  /// Canonical orientation: the last nonzero integer component is positive.
  bool is_canonical() const;

  UnitDirection operator-() const;
  bool operator==(const UnitDirection& o) const { return d_ == o.d_ && k_ == o.k_; }

  std::string to_string() const;

 private:
  int d_ = 0;
  IVec k_{};
  Vec unit_{};
  std::int64_t norm_int_ = 0;
};

/// Orthogonal frame O_nu from the reflection formula: O e_d = nu, and O = -Id
/// for nu = -e_d. Throws DomainError if |nu| differs from 1 by more than 1e-9.
Mat orientation_matrix(std::span<const double> nu);
Mat orientation_matrix(const UnitDirection& nu);

/// Integer form of O_nu for rational nu: O = N / D with N integer.
struct ExactFrame {
  int d = 0;
  std::array<std::array<std::int64_t, kMaxDim>, kMaxDim> n{};
  std::int64_t denom = 1;
};

/// Throws DomainError if nu is not rational.
ExactFrame exact_orientation_matrix(const UnitDirection& nu);

/// Smallest m with m * O_nu * (z, 0) integer for all integer z.
std::int64_t rational_direction_scale(const UnitDirection& nu);

struct OrientedCube {
  Vec center{};
  UnitDirection direction;
  double side = 0.0;
  Mat frame;

  int dim() const { return direction.dim(); }
  /// Strict membership |(x - center) . nu_j| < side / 2 for all j.
  bool contains(const Vec& x) const;
  std::vector<Vec> corners() const;
};

OrientedCube oriented_cube(const Vec& center, const UnitDirection& nu, double side);

struct JumpDatum {
  int a = 0;
  int b = 1;
  UnitDirection direction;
  Vec anchor{};

  /// a on the open half-space the normal points into, b otherwise.
  int eval(const Vec& x) const;
  /// (a, b, nu) and (b, a, -nu) describe the same jump; return the
  /// representative whose normal is canonical.
  JumpDatum canonical() const;
};

JumpDatum make_jump_datum(int a, int b, const UnitDirection& nu, const Vec& anchor);

/// sqrt(1 + 4 / (1 - (nu1 . nu2)^2)).
double hyperplane_distance_constant(std::span<const double> nu1, std::span<const double> nu2);

/// Half-open integer box [lo, hi) in R^{d-1}.
struct IntervalBox {
  std::vector<std::int64_t> lo;
  std::vector<std::int64_t> hi;

  int dim() const { return static_cast<int>(lo.size()); }
  std::int64_t max_side() const;
  std::int64_t volume() const;
  IntervalBox translated(std::span<const std::int64_t> z) const;
};

/// Box in a rotated frame: { x : lo_j <(=) (x - origin) . frame_j < hi_j }.
///
/// Everything a lattice problem needs is kept in doubled coordinates so that
/// cell centers (k + 1/2) and pair midpoints are integers. When the frame is
/// rational all membership and margin tests are exact integer comparisons.
struct OrientedRegion {
  int d = 0;
  Mat frame;
  std::optional<ExactFrame> exact;
  IVec origin2{};                // 2 * origin
  std::array<std::int64_t, kMaxDim> lo2{};  // 2 * lower bound along frame_j
  std::array<std::int64_t, kMaxDim> hi2{};  // 2 * upper bound along frame_j
  bool half_open_inplane = false;           // lo_j <= y_j for j < d-1

  /// Membership of the point p2 / 2.
  bool contains2(const IVec& p2) const;
  /// Per-axis test: is the point p2 / 2 strictly inside the slab of axis j?
  bool inside_axis2(const IVec& p2, int j) const;
  /// Distance from p2 / 2 to both faces of axis j exceeds width.
  bool deep_axis2(const IVec& p2, int j, std::int64_t width) const;
  /// Coordinate y_j of p2 / 2 in the frame (floating point).
  double coordinate2(const IVec& p2, int j) const;
  /// Lattice bounding box [lo, hi] of the region.
  std::pair<IVec, IVec> bounding_box() const;

  bool operator==(const OrientedRegion& o) const;
};

/// Lattice region of a cube; requires 2 * center integer and integer side.
OrientedRegion cube_region(const OrientedCube& cube);

/// I^nu = m_nu O_nu (int I x s_max(I) (-1/2, 1/2)), half-open in-plane.
OrientedRegion oriented_interval_region(const IntervalBox& box, const UnitDirection& nu);

/// z^nu = m_nu O_nu (z, 0).
IVec lattice_shift(const UnitDirection& nu, std::span<const std::int64_t> z);

}  // namespace homlab
