#include "homlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>

namespace homlab {

namespace {

std::int64_t isqrt(std::int64_t s) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(s)));
  while (r * r > s) --r;
  while ((r + 1) * (r + 1) <= s) ++r;
  return r;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

void check_dim(int d) {
  if (d < 2 || d > kMaxDim) throw DomainError("dimension must be 2 or 3");
}

}  // namespace

double dot(const Vec& x, const Vec& y, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += x[i] * y[i];
  return s;
}

double norm(const Vec& x, int d) { return std::sqrt(dot(x, x, d)); }

Vec Mat::column(int j) const {
  Vec c{};
  for (int i = 0; i < d; ++i) c[i] = a[i][j];
  return c;
}

Vec Mat::apply(const Vec& x) const {
  Vec y{};
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) y[i] += a[i][j] * x[j];
  return y;
}

Vec Mat::apply_transpose(const Vec& x) const {
  Vec y{};
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) y[j] += a[i][j] * x[i];
  return y;
}

// ---------------------------------------------------------------------------
// UnitDirection

UnitDirection UnitDirection::from_integer(std::span<const std::int64_t> k) {
  const int d = static_cast<int>(k.size());
  check_dim(d);
  std::int64_t g = 0;
  for (auto c : k) g = std::gcd(g, std::abs(c));
  if (g == 0) throw DomainError("zero vector has no direction");

  UnitDirection u;
  u.d_ = d;
  std::int64_t sq = 0;
  for (int i = 0; i < d; ++i) {
    u.k_[i] = k[i] / g;
    if (std::abs(u.k_[i]) > kSnapLimit)
      throw DomainError("direction component exceeds the snap limit 10^4");
    sq += u.k_[i] * u.k_[i];
  }
  const double len = std::sqrt(static_cast<double>(sq));
  for (int i = 0; i < d; ++i) u.unit_[i] = static_cast<double>(u.k_[i]) / len;
  const std::int64_t r = isqrt(sq);
  u.norm_int_ = (r * r == sq) ? r : 0;
  return u;
}

UnitDirection UnitDirection::snap(std::span<const double> v) {
  const int d = static_cast<int>(v.size());
  check_dim(d);
  double mx = 0.0;
  for (double c : v) {
    if (!std::isfinite(c)) throw DomainError("non-finite direction component");
    mx = std::max(mx, std::abs(c));
  }
  if (mx == 0.0) throw DomainError("zero vector has no direction");
  // Try every magnitude s of the largest component; keep the first vector
  // with the smallest angular error.
  double vn = 0.0;
  for (double c : v) vn += (c / mx) * (c / mx);
  vn = std::sqrt(vn);
  std::array<std::int64_t, kMaxDim> best{};
  double best_err = std::numeric_limits<double>::infinity();
  for (std::int64_t s = 1; s <= kSnapLimit; ++s) {
    std::array<std::int64_t, kMaxDim> k{};
    double kn = 0.0, kv = 0.0;
    for (int i = 0; i < d; ++i) {
      k[i] = static_cast<std::int64_t>(std::nearbyint(v[i] / mx * static_cast<double>(s)));
      kn += static_cast<double>(k[i] * k[i]);
      kv += static_cast<double>(k[i]) * (v[i] / mx);
    }
    const double err = 1.0 - kv / (std::sqrt(kn) * vn);
    if (err < best_err - 1e-15) {
      best_err = err;
      best = k;
      if (err <= 0.0) break;
    }
  }
  return from_integer(std::span<const std::int64_t>(best.data(), d));
}

UnitDirection UnitDirection::axis(int d, int j, bool negative) {
  std::array<std::int64_t, kMaxDim> k{};
  k[j] = negative ? -1 : 1;
  return from_integer(std::span<const std::int64_t>(k.data(), d));
}

bool UnitDirection::is_canonical() const {
  for (int i = d_ - 1; i >= 0; --i)
    if (k_[i] != 0) return k_[i] > 0;
  return true;
}

UnitDirection UnitDirection::operator-() const {
  UnitDirection u = *this;
  for (int i = 0; i < d_; ++i) {
    u.k_[i] = -k_[i];
    u.unit_[i] = -unit_[i];
  }
  return u;
}

std::string UnitDirection::to_string() const {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < d_; ++i) os << (i ? "," : "") << k_[i];
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// Frames

Mat orientation_matrix(std::span<const double> nu) {
  const int d = static_cast<int>(nu.size());
  check_dim(d);
  double sq = 0.0;
  for (double c : nu) sq += c * c;
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) throw DomainError("orientation_matrix: |nu| != 1");

  Mat o;
  o.d = d;
  bool minus_ed = nu[d - 1] == -1.0;
  for (int i = 0; i + 1 < d; ++i) minus_ed = minus_ed && nu[i] == 0.0;
  if (minus_ed) {
    for (int i = 0; i < d; ++i) o.a[i][i] = -1.0;
    return o;
  }
  Vec w{};
  for (int i = 0; i < d; ++i) w[i] = nu[i];
  w[d - 1] += 1.0;
  const double w2 = dot(w, w, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) o.a[i][j] = 2.0 * w[i] * w[j] / w2 - (i == j ? 1.0 : 0.0);
  return o;
}

Mat orientation_matrix(const UnitDirection& nu) {
  if (nu.is_rational()) {
    const ExactFrame e = exact_orientation_matrix(nu);
    Mat o;
    o.d = e.d;
    for (int i = 0; i < e.d; ++i)
      for (int j = 0; j < e.d; ++j)
        o.a[i][j] = static_cast<double>(e.n[i][j]) / static_cast<double>(e.denom);
    return o;
  }
  return orientation_matrix(std::span<const double>(nu.vec().data(), nu.dim()));
}

ExactFrame exact_orientation_matrix(const UnitDirection& nu) {
  if (!nu.is_rational()) throw DomainError("direction " + nu.to_string() + " is not rational");
  const int d = nu.dim();
  const std::int64_t n = nu.integer_norm();
  ExactFrame e;
  e.d = d;

  IVec v = nu.integer();
  v[d - 1] += n;
  std::int64_t v2 = 0;
  for (int i = 0; i < d; ++i) v2 += v[i] * v[i];
  if (v2 == 0) {
    for (int i = 0; i < d; ++i) e.n[i][i] = -1;
    e.denom = 1;
    return e;
  }
  std::int64_t g = v2;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      e.n[i][j] = 2 * v[i] * v[j] - (i == j ? v2 : 0);
      g = std::gcd(g, std::abs(e.n[i][j]));
    }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) e.n[i][j] /= g;
  e.denom = v2 / g;
  return e;
}

std::int64_t rational_direction_scale(const UnitDirection& nu) {
  const ExactFrame e = exact_orientation_matrix(nu);
  std::int64_t m = 1;
  for (int j = 0; j + 1 < e.d; ++j)
    for (int i = 0; i < e.d; ++i) {
      const std::int64_t den = e.denom / std::gcd(e.denom, std::abs(e.n[i][j]));
      m = std::lcm(m, den);
    }
  return m;
}

// ---------------------------------------------------------------------------
// Cubes and jump data

bool OrientedCube::contains(const Vec& x) const {
  const int d = dim();
  Vec r{};
  for (int i = 0; i < d; ++i) r[i] = x[i] - center[i];
  const Vec y = frame.apply_transpose(r);
  for (int j = 0; j < d; ++j)
    if (!(std::abs(y[j]) < side / 2.0)) return false;
  return true;
}

std::vector<Vec> OrientedCube::corners() const {
  const int d = dim();
  std::vector<Vec> out;
  for (int mask = 0; mask < (1 << d); ++mask) {
    Vec y{};
    for (int j = 0; j < d; ++j) y[j] = ((mask >> j) & 1) ? side / 2.0 : -side / 2.0;
    Vec x = frame.apply(y);
    for (int i = 0; i < d; ++i) x[i] += center[i];
    out.push_back(x);
  }
  return out;
}

OrientedCube oriented_cube(const Vec& center, const UnitDirection& nu, double side) {
  if (!(side > 0.0)) throw DomainError("cube side must be positive");
  OrientedCube c;
  c.center = center;
  c.direction = nu;
  c.side = side;
  c.frame = orientation_matrix(nu);
  return c;
}

int JumpDatum::eval(const Vec& x) const {
  // Sign test against the integer normal; exact for lattice points.
  const int d = direction.dim();
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += (x[i] - anchor[i]) * static_cast<double>(direction.integer()[i]);
  return s > 0.0 ? a : b;
}

JumpDatum JumpDatum::canonical() const {
  if (direction.is_canonical()) return *this;
  return JumpDatum{b, a, -direction, anchor};
}

JumpDatum make_jump_datum(int a, int b, const UnitDirection& nu, const Vec& anchor) {
  if (a == b) throw DomainError("jump datum needs two distinct labels");
  return JumpDatum{a, b, nu, anchor};
}

double hyperplane_distance_constant(std::span<const double> nu1, std::span<const double> nu2) {
  if (nu1.size() != nu2.size()) throw DomainError("dimension mismatch");
  double c = 0.0;
  for (std::size_t i = 0; i < nu1.size(); ++i) c += nu1[i] * nu2[i];
  const double den = 1.0 - c * c;
  if (!(den > 1e-14)) throw DomainError("hyperplanes are parallel");
  return std::sqrt(1.0 + 4.0 / den);
}

// ---------------------------------------------------------------------------
// Boxes and regions

std::int64_t IntervalBox::max_side() const {
  std::int64_t s = 0;
  for (int i = 0; i < dim(); ++i) s = std::max(s, hi[i] - lo[i]);
  return s;
}

std::int64_t IntervalBox::volume() const {
  std::int64_t v = 1;
  for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
  return v;
}

IntervalBox IntervalBox::translated(std::span<const std::int64_t> z) const {
  IntervalBox b = *this;
  for (int i = 0; i < dim(); ++i) {
    b.lo[i] += z[i];
    b.hi[i] += z[i];
  }
  return b;
}

namespace {

// 2 * D * y_j for the exact frame, where y = O^T (p2 - origin2) / 2.
std::int64_t exact_coord(const OrientedRegion& r, const IVec& p2, int j) {
  std::int64_t y = 0;
  for (int i = 0; i < r.d; ++i) y += (p2[i] - r.origin2[i]) * r.exact->n[i][j];
  return y;
}

}  // namespace

double OrientedRegion::coordinate2(const IVec& p2, int j) const {
  double y = 0.0;
  for (int i = 0; i < d; ++i) y += 0.5 * static_cast<double>(p2[i] - origin2[i]) * frame.a[i][j];
  return y;
}

bool OrientedRegion::inside_axis2(const IVec& p2, int j) const {
  const bool closed_lo = half_open_inplane && j + 1 < d;
  if (exact) {
    const std::int64_t y = exact_coord(*this, p2, j);
    const std::int64_t lo = exact->denom * lo2[j];
    const std::int64_t hi = exact->denom * hi2[j];
    return (closed_lo ? y >= lo : y > lo) && y < hi;
  }
  const double y = coordinate2(p2, j);
  const double lo = 0.5 * static_cast<double>(lo2[j]);
  const double hi = 0.5 * static_cast<double>(hi2[j]);
  return (closed_lo ? y >= lo : y > lo) && y < hi;
}

bool OrientedRegion::deep_axis2(const IVec& p2, int j, std::int64_t width) const {
  if (exact) {
    const std::int64_t y = exact_coord(*this, p2, j);
    const std::int64_t D = exact->denom;
    return y - D * lo2[j] > 2 * D * width && D * hi2[j] - y > 2 * D * width;
  }
  const double y = coordinate2(p2, j);
  const double w = static_cast<double>(width);
  return y - 0.5 * static_cast<double>(lo2[j]) > w && 0.5 * static_cast<double>(hi2[j]) - y > w;
}

bool OrientedRegion::contains2(const IVec& p2) const {
  for (int j = 0; j < d; ++j)
    if (!inside_axis2(p2, j)) return false;
  return true;
}

std::pair<IVec, IVec> OrientedRegion::bounding_box() const {
  IVec lo{}, hi{};
  for (int i = 0; i < d; ++i) {
    lo[i] = std::numeric_limits<std::int64_t>::max();
    hi[i] = std::numeric_limits<std::int64_t>::min();
  }
  for (int mask = 0; mask < (1 << d); ++mask) {
    Vec y{};
    for (int j = 0; j < d; ++j)
      y[j] = 0.5 * static_cast<double>(((mask >> j) & 1) ? hi2[j] : lo2[j]);
    const Vec x = frame.apply(y);
    for (int i = 0; i < d; ++i) {
      const double xi = x[i] + 0.5 * static_cast<double>(origin2[i]);
      lo[i] = std::min(lo[i], static_cast<std::int64_t>(std::floor(xi)) - 1);
      hi[i] = std::max(hi[i], static_cast<std::int64_t>(std::ceil(xi)) + 1);
    }
  }
  return {lo, hi};
}

bool OrientedRegion::operator==(const OrientedRegion& o) const {
  return d == o.d && origin2 == o.origin2 && lo2 == o.lo2 && hi2 == o.hi2 &&
         half_open_inplane == o.half_open_inplane && frame.a == o.frame.a;
}

OrientedRegion cube_region(const OrientedCube& cube) {
  const int d = cube.dim();
  OrientedRegion r;
  r.d = d;
  r.frame = cube.frame;
  if (cube.direction.is_rational()) r.exact = exact_orientation_matrix(cube.direction);
  for (int i = 0; i < d; ++i) {
    const double c2 = 2.0 * cube.center[i];
    if (c2 != std::nearbyint(c2))
      throw DomainError("lattice cube centers must lie on the half-integer lattice");
    r.origin2[i] = static_cast<std::int64_t>(c2);
  }
  if (cube.side != std::nearbyint(cube.side))
    throw DomainError("lattice cubes need an integer side length");
  const auto t = static_cast<std::int64_t>(cube.side);
  for (int j = 0; j < d; ++j) {
    r.lo2[j] = -t;
    r.hi2[j] = t;
  }
  return r;
}

OrientedRegion oriented_interval_region(const IntervalBox& box, const UnitDirection& nu) {
  const int d = nu.dim();
  if (box.dim() != d - 1) throw DomainError("interval box must have dimension d-1");
  for (int i = 0; i < box.dim(); ++i)
    if (box.hi[i] <= box.lo[i]) throw DomainError("degenerate interval box");
  const std::int64_t m = rational_direction_scale(nu);
  const std::int64_t s = box.max_side();

  OrientedRegion r;
  r.d = d;
  r.frame = orientation_matrix(nu);
  r.exact = exact_orientation_matrix(nu);
  r.half_open_inplane = true;
  for (int j = 0; j + 1 < d; ++j) {
    r.lo2[j] = 2 * m * box.lo[j];
    r.hi2[j] = 2 * m * box.hi[j];
  }
  r.lo2[d - 1] = -m * s;
  r.hi2[d - 1] = m * s;
  return r;
}

IVec lattice_shift(const UnitDirection& nu, std::span<const std::int64_t> z) {
  const int d = nu.dim();
  if (static_cast<int>(z.size()) != d - 1) throw DomainError("shift must have dimension d-1");
  const ExactFrame e = exact_orientation_matrix(nu);
  const std::int64_t m = rational_direction_scale(nu);
  IVec out{};
  for (int i = 0; i < d; ++i) {
    std::int64_t num = 0;
    for (int j = 0; j + 1 < d; ++j) num += e.n[i][j] * z[j];
    num *= m;
    out[i] = floor_div(num, e.denom);
    if (out[i] * e.denom != num) throw DomainError("lattice_shift: non-integer image");
  }
  return out;
}

}  // namespace homlab
