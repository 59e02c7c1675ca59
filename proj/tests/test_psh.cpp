// Complex Hessians, pluriharmonic calculus, interpolation, and the affine
// covariance of the linearized operator.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>

#include "cmalab/psh.hpp"

using namespace cmalab;

namespace {

// phi(z) = sum_{ij} a_{ij} z_i conj(z_j) for Hermitian a.
ScalarField hermitian_quadratic(GridPtr g, const CMat& a) {
  const int n = g->n;
  return sample_field(g, [n, a](const RPoint& p) {
    CPoint z = to_complex(p);
    Cplx acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) acc += a(i, j) * z[static_cast<std::size_t>(i)] * std::conj(z[static_cast<std::size_t>(j)]);
    return acc.real();
  });
}

double sup_diff_valid(const HermitianField& h, const CMat& a) {
  double worst = 0.0;
  for (NodeId id : h.valid) {
    CMat m = h.at(id);
    for (int i = 0; i < h.grid->n; ++i)
      for (int j = 0; j < h.grid->n; ++j) worst = std::max(worst, std::abs(m(i, j) - a(i, j)));
  }
  return worst;
}

}  // namespace

TEST_CASE("complex Hessian is exact on Hermitian quadratics") {
  for (int n : {1, 2}) {
    GridPtr g = build_grid(n, n == 1 ? 65 : 11, 1.1);
    CMat a = CMat::Identity();
    a(0, 0) = 2.0;
    if (n == 2) {
      a(1, 1) = 0.7;
      a(0, 1) = Cplx(0.3, 0.1);
      a(1, 0) = std::conj(a(0, 1));
    }
    HermitianField h = complex_hessian(hermitian_quadratic(g, a));
    REQUIRE(!h.valid.empty());
    CHECK(sup_diff_valid(h, a) < 1e-10);
  }
}

TEST_CASE("pluriharmonic polynomials are annihilated") {
  for (int n : {1, 2}) {
    GridPtr g = build_grid(n, n == 1 ? 65 : 11, 1.1);
    PluriharmonicPoly poly;
    poly.n = n;
    poly.b = {Cplx(0.4, -0.2), Cplx(0.1, 0.3)};
    poly.c = {Cplx(1.0, 2.0), Cplx(0.5, -1.0), Cplx(0.5, -1.0), Cplx(-0.3, 0.2)};
    poly.constant = 0.7;
    ScalarField f = sample_field(g, [&poly](const RPoint& p) { return poly.eval(p); });
    HermitianField h = complex_hessian(f);
    CHECK(sup_diff_valid(h, CMat::Zero()) < 1e-9);
  }
}

TEST_CASE("trace identity L_phi phi = n det(phi) on quadratics") {
  for (int n : {1, 2}) {
    GridPtr g = build_grid(n, n == 1 ? 65 : 11, 1.1);
    CMat a = CMat::Identity();
    a(0, 0) = 2.0;
    if (n == 2) {
      a(1, 1) = 0.8;
      a(0, 1) = Cplx(0.3, 0.1);
      a(1, 0) = std::conj(a(0, 1));
    }
    ScalarField phi = hermitian_quadratic(g, a);
    HermitianField h = complex_hessian(phi);
    ScalarField lphi = linearized_apply(h, phi);
    double det = hermitian_det(a, n);
    double worst = 0.0;
    for (NodeId id = 0; id < g->count(); ++id)
      if (lphi.is_defined(id)) worst = std::max(worst, std::abs(lphi[id] - n * det));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("ma_density and eigenvalue helpers") {
  GridPtr g = build_grid(1, 65, 1.1);
  ScalarField phi = sample_field(g, [](const RPoint& p) { return p[0] * p[0] + p[1] * p[1]; });
  HermitianField h = complex_hessian(phi);
  ScalarField det = ma_density(h);
  for (NodeId id : h.valid) CHECK(det[id] == doctest::Approx(1.0).epsilon(1e-9));

  CMat m = CMat::Identity();
  m(0, 0) = 3.0;
  m(1, 1) = 0.5;
  CHECK(hermitian_det(m, 2) == doctest::Approx(1.5));
  CHECK(hermitian_min_eig(m, 2) == doctest::Approx(0.5));

  ScalarField neg = sample_field(g, [](const RPoint& p) { return -(p[0] * p[0] + p[1] * p[1]); });
  PshReport rep = psh_violation(complex_hessian(neg));
  CHECK(rep.min_eigenvalue == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(rep.worst_node != kNoNode);
}

TEST_CASE("linearized_apply rejects singular Hessians") {
  GridPtr g = build_grid(1, 65, 1.1);
  ScalarField flat = sample_field(g, [](const RPoint& p) { return p[0]; });
  ScalarField u = sample_field(g, [](const RPoint& p) { return p[0] * p[0]; });
  CHECK_THROWS(linearized_apply(complex_hessian(flat), u));
}

TEST_CASE("pluriharmonic_at recovers the Taylor polynomial") {
  GridPtr g = build_grid(1, 129, 1.1);
  Cplx b(0.4, -0.3), c(0.2, 0.5);
  ScalarField phi = sample_field(g, [b, c](const RPoint& p) {
    Cplx z(p[0], p[1]);
    return std::norm(z) + (b * z + c * z * z).real() + 0.9;
  });
  NodeId x0 = g->snap({0.3, -0.2, 0.0, 0.0});
  PluriharmonicPoly h = pluriharmonic_at(phi, x0);
  CPoint zc = to_complex(g->point(x0));
  // phi - h - phi(x0) = |z - x0|^2 exactly for this phi
  double worst = 0.0;
  for (NodeId id = 0; id < g->count(); ++id) {
    RPoint p = g->point(id);
    CPoint z = to_complex(p);
    double expect = std::norm(z[0] - zc[0]);
    worst = std::max(worst, std::abs(phi[id] - h.eval(p) - phi[x0] - expect));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("finite differences converge at second order on smooth fields") {
  auto f = [](const RPoint& p) { return std::exp(p[0]) * std::cos(1.3 * p[1]); };
  auto fxx = [](const RPoint& p) { return std::exp(p[0]) * std::cos(1.3 * p[1]); };
  double errs[2];
  int k = 0;
  for (int res : {65, 129}) {
    GridPtr g = build_grid(1, res, 1.1);
    ScalarField s = sample_field(g, f);
    NodeId mid = g->count() / 2;
    NodeId probe = g->shifted(mid, {5, -3, 0, 0});
    errs[k++] = std::abs(fd_second(s, probe, 0) - fxx(g->point(probe)));
  }
  double order = std::log2(errs[0] / errs[1]);
  CHECK(order > 1.9);
}

TEST_CASE("tricubic interpolation is exact on cubics") {
  GridPtr g = build_grid(1, 65, 1.1);
  auto cubic = [](const RPoint& p) {
    return p[0] * p[0] * p[0] - 2.0 * p[0] * p[1] * p[1] + 0.5 * p[1] + 1.0;
  };
  ScalarField s = sample_field(g, cubic);
  double out = 0.0;
  RPoint q{0.123, -0.456, 0.0, 0.0};
  REQUIRE(tricubic(s, q, &out));
  CHECK(out == doctest::Approx(cubic(q)).epsilon(1e-12));
  // an undefined node in the 4^d cube makes the stencil unavailable
  NodeId hole = g->snap(q);
  s.defined[static_cast<std::size_t>(hole)] = 0;
  CHECK(!tricubic(s, q, &out));
}

TEST_CASE("affine map inverse and composition") {
  AffineMap m;
  m.n = 2;
  m.T(0, 0) = Cplx(0.8, 0.3);
  m.T(0, 1) = Cplx(0.1, -0.2);
  m.T(1, 0) = Cplx(0.0, 0.4);
  m.T(1, 1) = Cplx(1.1, 0.0);
  m.x0 = {Cplx(0.2, -0.1), Cplx(-0.3, 0.05)};
  m.lambda = 0.7;

  CPoint w{Cplx(0.4, 0.6), Cplx(-0.2, 0.1)};
  CPoint z = m.apply(w);
  CPoint back = m.inverse().apply(z);
  CHECK(std::abs(back[0] - w[0]) < 1e-12);
  CHECK(std::abs(back[1] - w[1]) < 1e-12);

  AffineMap composed = m.compose(m.inverse());
  CPoint same = composed.apply(w);
  CHECK(std::abs(same[0] - w[0]) < 1e-10);
  CHECK(std::abs(same[1] - w[1]) < 1e-10);
}

TEST_CASE("linearized operator is affine covariant: integer scaling to 1e-9") {
  GridPtr g = build_grid(1, 129, 1.1);
  double h = g->spacing;
  ScalarField phi = sample_field(g, [](const RPoint& p) {
    double r2 = p[0] * p[0] + p[1] * p[1];
    return r2 + 0.25 * r2 * r2;
  });
  ScalarField u = sample_field(g, [](const RPoint& p) {
    return p[0] * p[0] * p[1] + 0.5 * p[0] - 0.2 * p[1] * p[1];
  });
  ScalarField lu = linearized_apply(complex_hessian(phi), u);

  // z = 2 w lands every target node on the source lattice
  AffineMap map;
  map.n = 1;
  map.lambda = 4.0;
  GridPtr target = build_grid(1, 33, 16.0 * h);
  double s = map.lambda * std::pow(map.abs_det(), 2.0);  // lambda |det T|^{2/n}, n = 1

  NormalizedPair np = normalize_pair(phi, u, map, PluriharmonicPoly{}, target);
  ScalarField ltilde = linearized_apply(complex_hessian(np.phi), np.u);

  double worst = 0.0;
  int compared = 0;
  for (NodeId id = 0; id < target->count(); ++id) {
    if (!ltilde.is_defined(id)) continue;
    RPoint w = target->point(id);
    double dist = 0.0;
    NodeId src = g->snap(to_real(map.apply(to_complex(w))), &dist);
    REQUIRE(dist < 1e-12);  // integer scaling: images are lattice nodes
    if (!lu.is_defined(src)) continue;
    worst = std::max(worst, std::abs(ltilde[id] - s * lu[src]));
    ++compared;
  }
  CHECK(compared > 100);
  CHECK(worst < 1e-9);
}

TEST_CASE("linearized operator is affine covariant: general map to 20 h^2") {
  GridPtr g = build_grid(1, 257, 1.1);
  double h = g->spacing;
  ScalarField phi = sample_field(g, [](const RPoint& p) {
    double r2 = p[0] * p[0] + p[1] * p[1];
    return r2 + 0.25 * r2 * r2;
  });
  ScalarField u = sample_field(g, [](const RPoint& p) {
    return p[0] * p[0] * p[1] + 0.5 * p[0] - 0.2 * p[1] * p[1];
  });
  ScalarField lu = linearized_apply(complex_hessian(phi), u);

  AffineMap map;
  map.n = 1;
  map.T(0, 0) = Cplx(0.8, 0.35);
  map.x0 = {Cplx(0.1, -0.05), Cplx(0.0, 0.0)};
  map.lambda = 0.6;
  double s = map.lambda * std::pow(map.abs_det(), 2.0);

  GridPtr target = build_grid(1, 65, 0.4);
  NormalizedPair np = normalize_pair(phi, u, map, PluriharmonicPoly{}, target);
  ScalarField ltilde = linearized_apply(complex_hessian(np.phi), np.u);

  // truncation lives on the grid where the operator is evaluated
  double ht = std::max(h, target->spacing);
  double worst = 0.0;
  int compared = 0;
  for (NodeId id = 0; id < target->count(); ++id) {
    if (!ltilde.is_defined(id)) continue;
    RPoint w = target->point(id);
    RPoint z = to_real(map.apply(to_complex(w)));
    double lval = 0.0;
    if (!tricubic(lu, z, &lval)) continue;
    worst = std::max(worst, std::abs(ltilde[id] - s * lval));
    ++compared;
  }
  CHECK(compared > 100);
  CHECK(worst < 20.0 * ht * ht);
}
