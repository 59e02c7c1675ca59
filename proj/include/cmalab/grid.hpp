#pragma once

#include <array>
#include <complex>
#include <functional>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace cmalab {

using NodeId = std::int64_t;
constexpr NodeId kNoNode = -1;
constexpr int kMaxDim = 4;  // real dimension cap (complex dimension <= 2)

using RPoint = std::array<double, kMaxDim>;               // real coords, unused axes zero
using CPoint = std::array<std::complex<double>, 2>;       // z_i = x_{2i} + i*x_{2i+1}
using IdxVec = std::array<int, kMaxDim>;

inline CPoint to_complex(const RPoint& p) {
  return {std::complex<double>(p[0], p[1]), std::complex<double>(p[2], p[3])};
}
inline RPoint to_real(const CPoint& z) {
  return {z[0].real(), z[0].imag(), z[1].real(), z[1].imag()};
}

/// Uniform lattice over a box in R^{2n} ~ C^n, centered so the box
/// midpoint is a grid node (odd per-axis counts).
struct Grid {
  int n = 1;                // complex dimension, 1 or 2
  IdxVec dims{};            // per-real-axis node counts (2n entries used)
  RPoint origin{};          // coordinate of node (0,...,0)
  double spacing = 0.0;     // identical on all axes

  int dim() const { return 2 * n; }

  NodeId count() const {
    NodeId c = 1;
    for (int a = 0; a < dim(); ++a) c *= dims[a];
    return c;
  }

  // Row-major, last axis fastest.
  NodeId index(const IdxVec& ix) const {
    NodeId id = 0;
    for (int a = 0; a < dim(); ++a) id = id * dims[a] + ix[a];
    return id;
  }

  IdxVec coords(NodeId id) const {
    IdxVec ix{};
    for (int a = dim() - 1; a >= 0; --a) {
      ix[a] = static_cast<int>(id % dims[a]);
      id /= dims[a];
    }
    return ix;
  }

  bool in_bounds(const IdxVec& ix) const {
    for (int a = 0; a < dim(); ++a)
      if (ix[a] < 0 || ix[a] >= dims[a]) return false;
    return true;
  }

  RPoint point(NodeId id) const {
    IdxVec ix = coords(id);
    RPoint p{};
    for (int a = 0; a < dim(); ++a) p[a] = origin[a] + spacing * ix[a];
    return p;
  }

  NodeId neighbor(NodeId id, int axis, int step) const {
    IdxVec ix = coords(id);
    ix[axis] += step;
    return in_bounds(ix) ? index(ix) : kNoNode;
  }

  NodeId shifted(NodeId id, const IdxVec& off) const {
    IdxVec ix = coords(id);
    for (int a = 0; a < dim(); ++a) ix[a] += off[a];
    return in_bounds(ix) ? index(ix) : kNoNode;
  }

  /// Nearest lattice node to an arbitrary point (clamped to the box).
  NodeId snap(const RPoint& p, double* snap_dist = nullptr) const;

  bool same_layout(const Grid& o) const {
    return n == o.n && dims == o.dims && origin == o.origin && spacing == o.spacing;
  }
};

using GridPtr = std::shared_ptr<const Grid>;

/// Lattice covering [-halfwidth, halfwidth]^{2n} with `resolution` nodes per
/// real axis. Resolution must be odd and >= 5 so the center is a node.
GridPtr build_grid(int n, int resolution, double halfwidth);

/// Real-valued function sampled on the full lattice. `defined` marks the
/// nodes carrying meaningful values (interior + boundary closure).
struct ScalarField {
  GridPtr grid;
  std::vector<double> values;
  std::vector<std::uint8_t> defined;

  ScalarField() = default;
  explicit ScalarField(GridPtr g, double fill = 0.0)
      : grid(std::move(g)),
        values(static_cast<std::size_t>(grid->count()), fill),
        defined(static_cast<std::size_t>(grid->count()), 0) {}

  double& operator[](NodeId id) { return values[static_cast<std::size_t>(id)]; }
  double operator[](NodeId id) const { return values[static_cast<std::size_t>(id)]; }
  bool is_defined(NodeId id) const { return defined[static_cast<std::size_t>(id)] != 0; }
  void set(NodeId id, double v) {
    values[static_cast<std::size_t>(id)] = v;
    defined[static_cast<std::size_t>(id)] = 1;
  }
};

ScalarField sample_field(GridPtr grid, const std::function<double(const RPoint&)>& f);

// CMAF binary field format: magic "CMAF", u32 version=1, u8 n, 2n x u32 dims,
// 2n x f64 origin, f64 spacing, f64 payload little-endian row-major.
void write_cmaf_field(const std::string& path, const ScalarField& f);
ScalarField read_cmaf_field(const std::string& path);

}  // namespace cmalab
