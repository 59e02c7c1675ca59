#pragma once

#include <functional>
#include <optional>
#include <unordered_map>

#include "cmalab/grid.hpp"

namespace cmalab {

/// Implicit shape: negative inside Omega, positive outside.
using ShapeFn = std::function<double(const RPoint&)>;

/// Dirichlet data evaluated at exact boundary points.
using BoundaryFn = std::function<double(const RPoint&)>;

/// A grid line from an interior node hits the analytic boundary before the
/// next lattice node (Shortley-Weller record).
struct Crossing {
  NodeId interior = kNoNode;  // inside node the segment starts from
  NodeId ghost = kNoNode;     // outside lattice node past the boundary
  int axis = 0;
  int dir = 1;                // +1 or -1
  double frac = 1.0;          // boundary at interior + frac*h along axis*dir, in (0,1]
  RPoint point{};             // exact boundary point
  double value = 0.0;         // Dirichlet value stored with the mask
};

/// Value at a ghost lattice node expressed as a linear functional of interior
/// values plus Dirichlet data at crossings. Exact on quadratics.
struct GhostRule {
  std::vector<std::pair<NodeId, double>> node_terms;
  std::vector<std::pair<int, double>> crossing_terms;  // index into crossings
};

struct DomainMask {
  GridPtr grid;
  std::vector<std::uint8_t> label;  // 0 exterior, 1 interior, 2 boundary/ghost
  std::vector<NodeId> interior;     // ascending node order
  std::vector<NodeId> boundary;
  double gamma = 0.0;
  std::vector<Crossing> crossings;
  std::unordered_map<NodeId, GhostRule> ghost_rules;
  std::vector<NodeId> unresolved_ghosts;  // ghosts closed by nearest-value fallback
  // crossing lookup: key = interior*8 + axis*2 + (dir>0)
  std::unordered_map<NodeId, int> crossing_index;

  bool is_interior(NodeId id) const { return label[static_cast<std::size_t>(id)] == 1; }
  bool is_boundary(NodeId id) const { return label[static_cast<std::size_t>(id)] == 2; }

  const Crossing* crossing_at(NodeId interior_node, int axis, int dir) const {
    auto it = crossing_index.find(interior_node * 8 + axis * 2 + (dir > 0 ? 1 : 0));
    return it == crossing_index.end() ? nullptr : &crossings[static_cast<std::size_t>(it->second)];
  }

  /// True when every lattice node at the given offsets from `id` is interior.
  bool has_full_stencil(NodeId id, int ring) const;
};

using DomainMaskPtr = std::shared_ptr<const DomainMask>;

/// Classify lattice nodes against Omega with B_{1-gamma} subset Omega subset
/// B_{1+gamma}. With no perturbation and gamma = 0 the domain is the unit
/// ball. A custom shape must respect the sandwich; this is verified node-wise.
DomainMaskPtr build_ball_domain(GridPtr grid, double gamma,
                                std::optional<ShapeFn> perturbation = std::nullopt,
                                const BoundaryFn& dirichlet = nullptr);

/// Fill a full-lattice value array: interior nodes from `interior_values`,
/// ghost nodes via the mask's closure rules with Dirichlet data `bc`.
ScalarField ghost_fill(const DomainMask& mask, const ScalarField& interior_values,
                       const BoundaryFn& bc);

/// Monge-Ampere measure: density (det of the complex Hessian) with Lebesgue
/// cell weights h^{2n}.
struct MAMeasure {
  ScalarField density;
  double cell_weight = 0.0;

  static MAMeasure lebesgue(GridPtr grid);
  static MAMeasure from_density(ScalarField density);

  double integrate(const std::vector<NodeId>& set) const;
  /// m(A): node count times cell weight.
  double lebesgue_of(const std::vector<NodeId>& set) const {
    return cell_weight * static_cast<double>(set.size());
  }
};

// Mask CMAF format: header as for fields, u8 payload (0/1/2), then a
// trailing record table: u64 count, records of (u64 ghost index,
// 2n x f64 boundary point, f64 value).
void write_cmaf_mask(const std::string& path, const DomainMask& mask);
DomainMaskPtr read_cmaf_mask(const std::string& path);

}  // namespace cmalab
