#pragma once

// Discrete tensor calculus on periodic grids: curvature of a metric field,
// covariant differential operators, integration, and the linearized scalar
// curvature pair L, L*.
//
// Sign conventions (fixed by the adjointness and finite-difference tests, see
// docs/CONVENTIONS.md):
//   lap f        = trace_g(Hessian f), so -lap has non-negative spectrum
//   (delta T)_j  = -grad^i T_{ij}   (minus divergence)
//   L(h)         = -lap(tr_g h) + div div h - <Ric, h>
//   L* f         = D^2 f - (lap f) g - f Ric,   L* 1 = -Ric
// The discrete L and L* are exactly adjoint: div div is implemented as the
// matrix transpose of the Hessian, and the solver Laplacian is an exactly
// self-adjoint divergence form.

#include <optional>

#include "yamabe/grid.hpp"

namespace yamabe {

// Pointwise metric data shared by the operators: inverse metric, volume
// density sqrt(det g), first metric derivatives and Christoffel symbols.
class GeometryCache {
 public:
  explicit GeometryCache(MetricField g);

  const MetricField& metric() const { return g_; }
  const PeriodicGrid& grid() const { return g_.grid; }
  const SymTensorField& inverse() const { return inv_; }
  const std::vector<double>& sqrt_det() const { return sqrt_det_; }
  const std::vector<double>& metric_d1(int axis) const { return dg_[axis]; }

  // Christoffel symbol Gamma^k_{ij} at point p.
  double christoffel(std::int64_t p, int k, int i, int j) const {
    const int n = grid().dim;
    return gamma_[(p * n + k) * sym_count(n) + sym_index(n, i, j)];
  }

 private:
  MetricField g_;
  SymTensorField inv_;
  std::vector<double> sqrt_det_;
  std::vector<std::vector<double>> dg_;  // dg_[a]: d1 of every metric component
  std::vector<double> gamma_;            // (p, k, sym(i,j))

  friend struct GeometryCacheAccess;
};

struct CurvatureResult {
  SymTensorField ric;  // Ricci tensor
  ScalarField s;       // scalar curvature
  SymTensorField z;    // trace-free Ricci, z = Ric - (s/n) g
};

struct DifferentialResult {
  OneFormField grad;
  SymTensorField hess;   // covariant Hessian D^2 f
  SymTensorField hess0;  // trace-free part D_0^2 f
  ScalarField lap;       // trace_g(hess)
};

CurvatureResult curvature(const GeometryCache& geo);
CurvatureResult curvature(const MetricField& g);

DifferentialResult differential(const GeometryCache& geo, const ScalarField& f);
DifferentialResult differential(const MetricField& g, const ScalarField& f);

// Minus covariant divergence of a symmetric 2-tensor: (delta T)_j = -grad^i T_{ij}.
OneFormField divergence(const GeometryCache& geo, const SymTensorField& T);
OneFormField divergence(const MetricField& g, const SymTensorField& T);

// Exactly self-adjoint divergence-form Laplace-Beltrami operator
// (1/w) d_i (w g^{ij} d_j f). This is the Laplacian used by the Yamabe solver
// and inside L / L*; it agrees with trace_g(Hessian) to O(h^4).
ScalarField laplace_beltrami(const GeometryCache& geo, const ScalarField& f);

// Dirichlet form of laplace_beltrami: integral of |df|^2_g dV_g, evaluated as
// -<f, lap f> so that energy identities hold to rounding.
double dirichlet_energy(const GeometryCache& geo, const ScalarField& f);

// Linearized scalar curvature and its formal adjoint. The Ricci tensor of g
// is an input so callers can reuse a curvature() result.
ScalarField lin_scalar(const GeometryCache& geo, const SymTensorField& ric,
                       const SymTensorField& h);
SymTensorField lin_scalar_adjoint(const GeometryCache& geo, const SymTensorField& ric,
                                  const ScalarField& f);
ScalarField lin_scalar(const MetricField& g, const SymTensorField& h);
SymTensorField lin_scalar_adjoint(const MetricField& g, const ScalarField& f);

double integrate(const GeometryCache& geo, const ScalarField& f);
double volume(const GeometryCache& geo);
double volume(const MetricField& g);
MetricField normalize_volume(const MetricField& g);

// Pointwise full contraction g^{ik} g^{jl} A_{ij} B_{kl}.
ScalarField tensor_inner(const GeometryCache& geo, const SymTensorField& A,
                         const SymTensorField& B);

// Constancy-of-scalar-curvature diagnostic: lap_g s_g.
ScalarField phi_map(const MetricField& g);

// n=3 conformal invariant omega = d(Ric - (s/4) g) (indices down).
ThreeTensorField cotton3(const MetricField& g);

// Norms.
double linf_norm(const std::vector<double>& data);
template <int R>
double linf_norm(const FieldBase<R>& f) { return linf_norm(f.data); }
double l2_norm(const GeometryCache& geo, const ScalarField& f);
double l2_norm(const GeometryCache& geo, const SymTensorField& T);
// Plain componentwise L2 with coordinate measure (refinement comparisons).
template <int R>
double l2_norm_flat(const FieldBase<R>& f) {
  double s = 0.0;
  for (double v : f.data) s += v * v;
  return std::sqrt(s * f.grid.cell_volume());
}

}  // namespace yamabe
