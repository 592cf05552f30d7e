#include "homlab/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>
#include <tuple>

#include "homlab/linear_program.hpp"

namespace homlab {

double Stencil::anisotropy(const Vec& nu) const {
  double s = 0.0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    double p = 0.0;
    for (int j = 0; j < d; ++j) p += nu[j] * static_cast<double>(offsets[i][j]);
    s += weights[i] * std::abs(p);
  }
  return s;
}

double Stencil::profiled_anisotropy(const Vec& nu, const DirectionProfile& psi) const {
  double s = 0.0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    double p = 0.0;
    for (int j = 0; j < d; ++j) p += nu[j] * static_cast<double>(offsets[i][j]);
    s += weights[i] * psi(normals[i]) * std::abs(p);
  }
  return s;
}

int Stencil::reach() const {
  std::int64_t r = 0;
  for (const IVec& e : offsets)
    for (int j = 0; j < d; ++j) r = std::max(r, std::abs(e[j]));
  return static_cast<int>(r);
}

std::vector<std::pair<IVec, double>> Stencil::symmetric_offsets() const {
  std::vector<std::pair<IVec, double>> out;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    IVec neg{};
    for (int j = 0; j < kMaxDim; ++j) neg[j] = -offsets[i][j];
    out.emplace_back(offsets[i], weights[i]);
    out.emplace_back(neg, weights[i]);
  }
  return out;
}

std::string Stencil::name() const {
  if (radius == 1) return "facet";
  std::ostringstream os;
  os << "crofton" << radius;
  if (!target.isotropic()) os << "-psi" << target.coeff;
  return os.str();
}

namespace {

Vec unit_of(const IVec& e, int d) {
  double n2 = 0.0;
  for (int j = 0; j < d; ++j) n2 += static_cast<double>(e[j] * e[j]);
  const double n = std::sqrt(n2);
  Vec v{};
  for (int j = 0; j < d; ++j) v[j] = static_cast<double>(e[j]) / n;
  return v;
}

// Representative of {e, -e}: first nonzero component positive.
IVec half_representative(IVec e, int d) {
  for (int j = 0; j < d; ++j) {
    if (e[j] == 0) continue;
    if (e[j] < 0)
      for (int i = 0; i < d; ++i) e[i] = -e[i];
    break;
  }
  return e;
}

std::vector<IVec> primitive_half_offsets(int d, int radius) {
  std::vector<IVec> out;
  const int r = radius;
  IVec e{};
  for (e[0] = -r; e[0] <= r; ++e[0])
    for (e[1] = -r; e[1] <= r; ++e[1])
      for (e[2] = (d == 3 ? -r : 0); e[2] <= (d == 3 ? r : 0); ++e[2]) {
        std::int64_t g = 0;
        for (int j = 0; j < d; ++j) g = std::gcd(g, e[j]);
        if (g != 1) continue;
        if (half_representative(e, d) != e) continue;
        out.push_back(e);
      }
  return out;
}

std::vector<Vec> fit_directions(int d, int count, bool full_circle) {
  std::vector<Vec> out;
  if (d == 2) {
    const double span = full_circle ? 2.0 * std::numbers::pi : std::numbers::pi;
    for (int i = 0; i < count; ++i) {
      const double th = span * i / count;
      out.push_back({std::cos(th), std::sin(th), 0.0});
    }
    return out;
  }
  // Fibonacci points on the upper hemisphere (or the whole sphere).
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = full_circle ? 1.0 - 2.0 * (i + 0.5) / count : 1.0 - (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    out.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  for (int j = 0; j < d; ++j) {
    Vec a{};
    a[j] = 1.0;
    out.push_back(a);
  }
  return out;
}

// Signed permutations of the axes that leave the profile unchanged.
std::vector<std::array<int, kMaxDim>> symmetry_group(int d, const DirectionProfile& psi) {
  std::vector<std::array<int, kMaxDim>> group;  // entry j: +-(1 + source axis)
  std::array<int, kMaxDim> perm{0, 1, 2};
  do {
    if (d == 2 && perm[2] != 2) continue;
    if (!psi.isotropic() && perm[0] != 0) continue;
    for (int signs = 0; signs < (1 << d); ++signs) {
      std::array<int, kMaxDim> g{};
      for (int j = 0; j < d; ++j) g[j] = ((signs >> j) & 1 ? -1 : 1) * (perm[j] + 1);
      group.push_back(g);
    }
  } while (std::next_permutation(perm.begin(), perm.begin() + d));
  return group;
}

double relative_error(const Stencil& s, const std::vector<Vec>& dirs) {
  double err = 0.0;
  for (const Vec& n : dirs) {
    const double want = s.target(n);
    err = std::max(err, std::abs(s.profiled_anisotropy(n, s.target) - want) / want);
  }
  return err;
}

Stencil fit_stencil(int radius, int d, const DirectionProfile& target) {
  Stencil s;
  s.d = d;
  s.radius = radius;
  s.target = target;
  s.offsets = primitive_half_offsets(d, radius);
  const std::size_t m = s.offsets.size();
  for (const IVec& e : s.offsets) s.normals.push_back(unit_of(e, d));

  // Column i of the response matrix: psi(e_i/|e_i|) |n . e_i| / psi(n).
  auto response = [&](const Vec& n) {
    std::vector<double> row(m + 1, 0.0);
    const double want = target(n);
    for (std::size_t i = 0; i < m; ++i) {
      double p = 0.0;
      for (int j = 0; j < d; ++j) p += n[j] * static_cast<double>(s.offsets[i][j]);
      row[i] = target(s.normals[i]) * std::abs(p) / want;
    }
    return row;
  };

  // minimize err s.t. |R w - 1| <= err on every fit direction, R(e_1) w = 1.
  const std::vector<Vec> dirs = fit_directions(d, d == 2 ? 180 : 240, false);
  std::vector<double> cost(m + 1, 0.0);
  cost[m] = 1.0;
  std::vector<std::vector<double>> a_ub;
  std::vector<double> b_ub;
  for (const Vec& n : dirs) {
    std::vector<double> row = response(n);
    std::vector<double> neg(m + 1);
    for (std::size_t i = 0; i < m; ++i) neg[i] = -row[i];
    row[m] = -1.0;
    neg[m] = -1.0;
    a_ub.push_back(row);
    b_ub.push_back(1.0);
    a_ub.push_back(neg);
    b_ub.push_back(-1.0);
  }
  Vec e1{1.0, 0.0, 0.0};
  std::vector<double> pin = response(e1);
  pin[m] = 0.0;
  const LinearProgramResult lp = solve_linear_program(cost, a_ub, b_ub, {pin}, {1.0});

  // Average over the symmetries of the target.
  std::map<IVec, std::size_t> index;
  for (std::size_t i = 0; i < m; ++i) index[s.offsets[i]] = i;
  const auto group = symmetry_group(d, target);
  std::vector<double> w(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (const auto& g : group) {
      IVec img{};
      for (int j = 0; j < d; ++j) {
        const int src = std::abs(g[j]) - 1;
        img[j] = (g[j] < 0 ? -1 : 1) * s.offsets[i][src];
      }
      w[index.at(half_representative(img, d))] += lp.x[i] / static_cast<double>(group.size());
    }

  double wmax = *std::max_element(w.begin(), w.end());
  Stencil out = s;
  out.offsets.clear();
  out.normals.clear();
  for (std::size_t i = 0; i < m; ++i) {
    if (w[i] <= 1e-9 * wmax) continue;
    out.offsets.push_back(s.offsets[i]);
    out.normals.push_back(s.normals[i]);
    out.weights.push_back(w[i]);
  }
  const double scale = target(e1) / out.profiled_anisotropy(e1, target);
  for (double& x : out.weights) x *= scale;
  out.fit_error = relative_error(out, fit_directions(d, d == 2 ? 360 : 1000, true));
  return out;
}

}  // namespace

Stencil facet_stencil(int d) {
  if (d != 2 && d != 3) throw ConfigError("stencil dimension must be 2 or 3");
  Stencil s;
  s.d = d;
  s.radius = 1;
  for (int j = 0; j < d; ++j) {
    IVec e{};
    e[j] = 1;
    s.offsets.push_back(e);
    s.weights.push_back(1.0);
    s.normals.push_back(unit_of(e, d));
  }
  s.fit_error = relative_error(s, fit_directions(d, d == 2 ? 360 : 1000, true));
  return s;
}

Stencil crofton_stencil(int radius, int d, const DirectionProfile& target) {
  if (d != 2 && d != 3) throw ConfigError("stencil dimension must be 2 or 3");
  if (radius == 1) {
    Stencil s = facet_stencil(d);
    s.target = target;
    s.fit_error = relative_error(s, fit_directions(d, d == 2 ? 360 : 1000, true));
    return s;
  }
  if (radius != 2) throw ConfigError("crofton stencil radius must be 1 or 2");

  static std::mutex mu;
  static std::map<std::tuple<int, int, double>, Stencil> cache;
  const auto key = std::make_tuple(radius, d, target.coeff);
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  Stencil s = fit_stencil(radius, d, target);
  std::lock_guard lock(mu);
  return cache.emplace(key, std::move(s)).first->second;
}

}  // namespace homlab
