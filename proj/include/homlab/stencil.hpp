#pragma once

#include <string>
#include <vector>

#include "homlab/geometry.hpp"
#include "homlab/random_media.hpp"

namespace homlab {

/// Weighted lattice neighbourhood. Only one offset of each +-e pair is stored;
/// the pair {p, p+e} is the same unordered pair as {p+e, p}, and both share
/// the weight.
struct Stencil {
  int d = 2;
  int radius = 1;
  std::vector<IVec> offsets;
  std::vector<double> weights;
  std::vector<Vec> normals;  // offsets / |offsets|
  DirectionProfile target;   // profile the weights were fitted against
  double fit_error = 0.0;    // max relative error of the fit on the check directions

  std::size_t size() const { return offsets.size(); }
  /// phi(nu) = sum_e w_e |nu . e|.
  double anisotropy(const Vec& nu) const;
  /// sum_e w_e psi(e/|e|) |nu . e|: flat-interface energy density when the
  /// pair weights carry the direction profile psi.
  double profiled_anisotropy(const Vec& nu, const DirectionProfile& psi) const;
  /// Max infinity norm of the offsets.
  int reach() const;
  /// Both orientations of every offset, with weights.
  std::vector<std::pair<IVec, double>> symmetric_offsets() const;
  std::string name() const;

  bool operator==(const Stencil& o) const {
    return d == o.d && radius == o.radius && offsets == o.offsets && weights == o.weights &&
           target == o.target;
  }
};

/// Nearest-neighbour facet stencil {e_1, ..., e_d} with unit weights.
Stencil facet_stencil(int d);

/// Radius 1: the facet stencil. Radius 2: all primitive offsets with
/// |e|_inf <= 2, weights fitted by a minimax linear program so that
/// profiled_anisotropy(nu, target) ~= target(nu), then symmetrized and
/// normalized so the fit is exact at e_1. Results are cached.
/// Throws ConfigError for other radii or dimensions.
Stencil crofton_stencil(int radius, int d, const DirectionProfile& target = {});

}  // namespace homlab
