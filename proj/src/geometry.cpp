#include "yamabe/geometry.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "yamabe/stencil.hpp"
#include "yamabe/summation.hpp"

namespace yamabe {

namespace {

constexpr double kEigenFloor = 1e-8;

std::vector<double> extract_comp(const PeriodicGrid& g, const std::vector<double>& data,
                                 int ncomp, int c) {
  const std::int64_t np = g.size();
  std::vector<double> out(np);
  for (std::int64_t p = 0; p < np; ++p) out[p] = data[p * ncomp + c];
  return out;
}

[[noreturn]] void numerical_failure(const PeriodicGrid& g, std::int64_t p,
                                    const char* what) {
  int idx[kMaxDim];
  g.coords(p, idx);
  std::ostringstream os;
  os << what << " at grid point (";
  for (int d = 0; d < g.dim; ++d) os << (d ? "," : "") << idx[d];
  os << ")";
  throw std::runtime_error(os.str());
}

}  // namespace

GeometryCache::GeometryCache(MetricField g) : g_(std::move(g)), inv_(g_.grid) {
  const PeriodicGrid& gr = g_.grid;
  const int n = gr.dim;
  const int nn = sym_count(n);
  const std::int64_t np = gr.size();
  sqrt_det_.resize(np);

  SmallMat m, mi;
  for (std::int64_t p = 0; p < np; ++p) {
    g_.fill_matrix(p, m);
    if (min_eigenvalue_sym(m, n) < kEigenFloor)
      numerical_failure(gr, p, "metric not positive definite");
    double det = invert(m, n, mi);
    if (!(det > 0.0)) numerical_failure(gr, p, "non-positive metric determinant");
    sqrt_det_[p] = std::sqrt(det);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) inv_.comp(p, i, j) = at(mi, n, i, j);
  }

  dg_.resize(n);
  for (int a = 0; a < n; ++a) {
    dg_[a].resize(static_cast<size_t>(np) * nn);
    for (int c = 0; c < nn; ++c) {
      auto dc = d1(gr, extract_comp(gr, g_.data, nn, c), a);
      for (std::int64_t p = 0; p < np; ++p) dg_[a][p * nn + c] = dc[p];
    }
  }

  gamma_.assign(static_cast<size_t>(np) * n * nn, 0.0);
  for (std::int64_t p = 0; p < np; ++p) {
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
          double sum = 0.0;
          for (int l = 0; l < n; ++l) {
            const double dgi = dg_[i][p * nn + sym_index(n, j, l)];
            const double dgj = dg_[j][p * nn + sym_index(n, i, l)];
            const double dgl = dg_[l][p * nn + sym_index(n, i, j)];
            sum += inv_.comp(p, k, l) * (dgi + dgj - dgl);
          }
          gamma_[(p * n + k) * nn + sym_index(n, i, j)] = 0.5 * sum;
        }
      }
    }
  }
}

CurvatureResult curvature(const GeometryCache& geo) {
  const PeriodicGrid& gr = geo.grid();
  const int n = gr.dim;
  const int nn = sym_count(n);
  const std::int64_t np = gr.size();

  // Second metric derivatives: compact d2 on the diagonal, d1 of the cached
  // first derivatives for mixed pairs.
  std::vector<std::vector<double>> ddg(nn);  // indexed by sym pair (a<=b)
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      auto& slot = ddg[sym_index(n, a, b)];
      slot.resize(static_cast<size_t>(np) * nn);
      for (int c = 0; c < nn; ++c) {
        std::vector<double> dc;
        if (a == b) {
          dc = d2(gr, extract_comp(gr, geo.metric().data, nn, c), a);
        } else {
          dc = d1(gr, extract_comp(gr, geo.metric_d1(b), nn, c), a);
        }
        for (std::int64_t p = 0; p < np; ++p) slot[p * nn + c] = dc[p];
      }
    }
  }

  CurvatureResult out{SymTensorField(gr), ScalarField(gr), SymTensorField(gr)};
  const MetricField& g = geo.metric();
  const SymTensorField& inv = geo.inverse();

  std::vector<double> dinv(static_cast<size_t>(n) * n * n);  // dinv[m][k][l]
  std::vector<double> dgam(static_cast<size_t>(n) * n * n * n);  // dGamma[m][k][i][j]
  auto DINV = [&](int m, int k, int l) -> double& { return dinv[(m * n + k) * n + l]; };
  auto DGAM = [&](int m, int k, int i, int j) -> double& {
    return dgam[((m * n + k) * n + i) * n + j];
  };

  for (std::int64_t p = 0; p < np; ++p) {
    // d_m g^{kl} = -g^{ka} d_m g_{ab} g^{bl}
    for (int m = 0; m < n; ++m) {
      for (int k = 0; k < n; ++k) {
        for (int l = k; l < n; ++l) {
          double sum = 0.0;
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
              sum += inv.comp(p, k, a) *
                     geo.metric_d1(m)[p * nn + sym_index(n, a, b)] * inv.comp(p, b, l);
          DINV(m, k, l) = -sum;
          DINV(m, l, k) = -sum;
        }
      }
    }
    // d_m Gamma^k_{ij}
    for (int m = 0; m < n; ++m) {
      const auto& ddg_m = [&](int a, int ij) -> double {
        return ddg[sym_index(n, m, a)][p * nn + ij];
      };
      for (int k = 0; k < n; ++k) {
        for (int i = 0; i < n; ++i) {
          for (int j = i; j < n; ++j) {
            double sum = 0.0;
            for (int l = 0; l < n; ++l) {
              const double dgi = geo.metric_d1(i)[p * nn + sym_index(n, j, l)];
              const double dgj = geo.metric_d1(j)[p * nn + sym_index(n, i, l)];
              const double dgl = geo.metric_d1(l)[p * nn + sym_index(n, i, j)];
              sum += DINV(m, k, l) * (dgi + dgj - dgl);
              sum += inv.comp(p, k, l) *
                     (ddg_m(i, sym_index(n, j, l)) + ddg_m(j, sym_index(n, i, l)) -
                      ddg_m(l, sym_index(n, i, j)));
            }
            DGAM(m, k, i, j) = 0.5 * sum;
            DGAM(m, k, j, i) = 0.5 * sum;
          }
        }
      }
    }
    // Ric_ij = d_k Gamma^k_ij - d_i Gamma^k_kj + Gamma^k_km Gamma^m_ij
    //          - Gamma^k_im Gamma^m_kj, symmetrized to kill rounding asymmetry.
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        double a_ij = 0.0, a_ji = 0.0;
        for (int k = 0; k < n; ++k) {
          a_ij += DGAM(k, k, i, j) - DGAM(i, k, k, j);
          a_ji += DGAM(k, k, j, i) - DGAM(j, k, k, i);
        }
        for (int k = 0; k < n; ++k) {
          for (int m = 0; m < n; ++m) {
            const double trg = geo.christoffel(p, k, k, m);
            a_ij += trg * geo.christoffel(p, m, i, j) -
                    geo.christoffel(p, k, i, m) * geo.christoffel(p, m, k, j);
            a_ji += trg * geo.christoffel(p, m, j, i) -
                    geo.christoffel(p, k, j, m) * geo.christoffel(p, m, k, i);
          }
        }
        out.ric.comp(p, i, j) = 0.5 * (a_ij + a_ji);
      }
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += inv.comp(p, i, j) * out.ric.comp(p, i, j);
    if (!std::isfinite(s)) numerical_failure(gr, p, "NaN in curvature");
    out.s(p) = s;
    for (int c = 0; c < nn; ++c)
      out.z(p, c) = out.ric(p, c) - (s / n) * g(p, c);
  }
  return out;
}

CurvatureResult curvature(const MetricField& g) { return curvature(GeometryCache(g)); }

DifferentialResult differential(const GeometryCache& geo, const ScalarField& f) {
  const PeriodicGrid& gr = geo.grid();
  detail::check_same_grid(gr, f.grid, "differential");
  const int n = gr.dim;
  const std::int64_t np = gr.size();

  DifferentialResult out{OneFormField(gr), SymTensorField(gr), SymTensorField(gr),
                         ScalarField(gr)};

  std::vector<std::vector<double>> grad(n);
  for (int a = 0; a < n; ++a) grad[a] = d1(gr, f.data, a);
  for (int a = 0; a < n; ++a)
    for (std::int64_t p = 0; p < np; ++p) out.grad(p, a) = grad[a][p];

  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      auto dd = d1(gr, grad[b], a);
      for (std::int64_t p = 0; p < np; ++p) {
        double v = dd[p];
        for (int k = 0; k < n; ++k) v -= geo.christoffel(p, k, a, b) * grad[k][p];
        out.hess.comp(p, a, b) = v;
      }
    }
  }
  for (std::int64_t p = 0; p < np; ++p) {
    double lap = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        lap += geo.inverse().comp(p, i, j) * out.hess.comp(p, i, j);
    out.lap(p) = lap;
    for (int c = 0; c < out.hess.ncomp; ++c)
      out.hess0(p, c) = out.hess(p, c) - (lap / n) * geo.metric()(p, c);
  }
  return out;
}

DifferentialResult differential(const MetricField& g, const ScalarField& f) {
  return differential(GeometryCache(g), f);
}

OneFormField divergence(const GeometryCache& geo, const SymTensorField& T) {
  const PeriodicGrid& gr = geo.grid();
  detail::check_same_grid(gr, T.grid, "divergence");
  const int n = gr.dim;
  const int nn = sym_count(n);
  const std::int64_t np = gr.size();

  std::vector<std::vector<double>> dT(n);
  for (int k = 0; k < n; ++k) {
    dT[k].resize(static_cast<size_t>(np) * nn);
    for (int c = 0; c < nn; ++c) {
      auto dc = d1(gr, extract_comp(gr, T.data, nn, c), k);
      for (std::int64_t p = 0; p < np; ++p) dT[k][p * nn + c] = dc[p];
    }
  }

  OneFormField out(gr);
  for (std::int64_t p = 0; p < np; ++p) {
    for (int j = 0; j < n; ++j) {
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          double cov = dT[k][p * nn + sym_index(n, i, j)];
          for (int l = 0; l < n; ++l)
            cov -= geo.christoffel(p, l, k, i) * T.comp(p, l, j) +
                   geo.christoffel(p, l, k, j) * T.comp(p, i, l);
          sum += geo.inverse().comp(p, i, k) * cov;
        }
      }
      out(p, j) = -sum;
    }
  }
  return out;
}

OneFormField divergence(const MetricField& g, const SymTensorField& T) {
  return divergence(GeometryCache(g), T);
}

ScalarField laplace_beltrami(const GeometryCache& geo, const ScalarField& f) {
  const PeriodicGrid& gr = geo.grid();
  detail::check_same_grid(gr, f.grid, "laplace_beltrami");
  const int n = gr.dim;
  const std::int64_t np = gr.size();
  const auto& w = geo.sqrt_det();

  std::vector<double> acc(np, 0.0);
  std::vector<double> coef(np);
  // Diagonal blocks: compact self-adjoint divergence form.
  for (int a = 0; a < n; ++a) {
    for (std::int64_t p = 0; p < np; ++p) coef[p] = w[p] * geo.inverse().comp(p, a, a);
    div_form(gr, coef, f.data, a, acc);
  }
  // Mixed blocks via skew-adjoint first differences (both orders).
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (std::int64_t p = 0; p < np; ++p) coef[p] = w[p] * geo.inverse().comp(p, a, b);
      auto db = d1(gr, f.data, b);
      for (std::int64_t p = 0; p < np; ++p) db[p] *= coef[p];
      auto t1 = d1(gr, db, a);
      auto da = d1(gr, f.data, a);
      for (std::int64_t p = 0; p < np; ++p) da[p] *= coef[p];
      auto t2 = d1(gr, da, b);
      for (std::int64_t p = 0; p < np; ++p) acc[p] += t1[p] + t2[p];
    }
  }
  ScalarField out(gr);
  for (std::int64_t p = 0; p < np; ++p) out(p) = acc[p] / w[p];
  return out;
}

double dirichlet_energy(const GeometryCache& geo, const ScalarField& f) {
  ScalarField lf = laplace_beltrami(geo, f);
  const auto& w = geo.sqrt_det();
  double s = 0.0;
  for (std::int64_t p = 0; p < f.num_points(); ++p) s -= f(p) * lf(p) * w[p];
  return s * geo.grid().cell_volume();
}

namespace {

// w g^{ik} g^{jl} h_{kl}, all index pairs, row-major n*n per point.
std::vector<double> raised_weighted(const GeometryCache& geo, const SymTensorField& h) {
  const int n = geo.grid().dim;
  const std::int64_t np = geo.grid().size();
  std::vector<double> out(static_cast<size_t>(np) * n * n);
  for (std::int64_t p = 0; p < np; ++p) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        double sum = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            sum += geo.inverse().comp(p, i, k) * geo.inverse().comp(p, j, l) *
                   h.comp(p, k, l);
        sum *= geo.sqrt_det()[p];
        out[(p * n + i) * n + j] = sum;
        out[(p * n + j) * n + i] = sum;
      }
    }
  }
  return out;
}

}  // namespace

ScalarField lin_scalar(const GeometryCache& geo, const SymTensorField& ric,
                       const SymTensorField& h) {
  const PeriodicGrid& gr = geo.grid();
  detail::check_same_grid(gr, h.grid, "lin_scalar");
  const int n = gr.dim;
  const std::int64_t np = gr.size();
  const auto& w = geo.sqrt_det();

  // -lap(tr_g h)
  ScalarField trh(gr);
  for (std::int64_t p = 0; p < np; ++p) {
    double t = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t += geo.inverse().comp(p, i, j) * h.comp(p, i, j);
    trh(p) = t;
  }
  ScalarField lap_trh = laplace_beltrami(geo, trh);

  // div div h, as the exact discrete adjoint of the D1-based Hessian:
  // (1/w)[ D_i D_j (w H^{ij}) + D_m (w Gamma^m_{ij} H^{ij}) ].
  auto H = raised_weighted(geo, h);
  std::vector<double> term(np, 0.0);
  std::vector<double> tmp(np);
  for (int i = 0; i < n; ++i) {
    std::vector<double> vi(np, 0.0);
    for (int j = 0; j < n; ++j) {
      for (std::int64_t p = 0; p < np; ++p) tmp[p] = H[(p * n + i) * n + j];
      auto dj = d1(gr, tmp, j);
      for (std::int64_t p = 0; p < np; ++p) vi[p] += dj[p];
    }
    auto di = d1(gr, vi, i);
    for (std::int64_t p = 0; p < np; ++p) term[p] += di[p];
  }
  for (int m = 0; m < n; ++m) {
    for (std::int64_t p = 0; p < np; ++p) {
      double q = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          q += geo.christoffel(p, m, i, j) * H[(p * n + i) * n + j];
      tmp[p] = q;
    }
    auto dm = d1(gr, tmp, m);
    for (std::int64_t p = 0; p < np; ++p) term[p] += dm[p];
  }

  ScalarField out(gr);
  for (std::int64_t p = 0; p < np; ++p) {
    double rich = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        rich += H[(p * n + i) * n + j] * ric.comp(p, i, j) / w[p];
    out(p) = -lap_trh(p) + term[p] / w[p] - rich;
  }
  return out;
}

SymTensorField lin_scalar_adjoint(const GeometryCache& geo, const SymTensorField& ric,
                                  const ScalarField& f) {
  const PeriodicGrid& gr = geo.grid();
  detail::check_same_grid(gr, f.grid, "lin_scalar_adjoint");
  const std::int64_t np = gr.size();

  DifferentialResult df = differential(geo, f);
  ScalarField lapf = laplace_beltrami(geo, f);

  SymTensorField out(gr);
  for (std::int64_t p = 0; p < np; ++p)
    for (int c = 0; c < out.ncomp; ++c)
      out(p, c) = df.hess(p, c) - lapf(p) * geo.metric()(p, c) - f(p) * ric(p, c);
  return out;
}

ScalarField lin_scalar(const MetricField& g, const SymTensorField& h) {
  GeometryCache geo(g);
  return lin_scalar(geo, curvature(geo).ric, h);
}

SymTensorField lin_scalar_adjoint(const MetricField& g, const ScalarField& f) {
  GeometryCache geo(g);
  return lin_scalar_adjoint(geo, curvature(geo).ric, f);
}

double integrate(const GeometryCache& geo, const ScalarField& f) {
  detail::check_same_grid(geo.grid(), f.grid, "integrate");
  const auto& w = geo.sqrt_det();
  NeumaierSum s;
  for (std::int64_t p = 0; p < f.num_points(); ++p) s.add(f(p) * w[p]);
  return s.value() * geo.grid().cell_volume();
}

double volume(const GeometryCache& geo) {
  const auto& w = geo.sqrt_det();
  NeumaierSum s;
  for (double v : w) s.add(v);
  return s.value() * geo.grid().cell_volume();
}

double volume(const MetricField& g) { return volume(GeometryCache(g)); }

MetricField normalize_volume(const MetricField& g) {
  double v = volume(g);
  if (!(v > 0.0)) throw std::runtime_error("normalize_volume: non-positive volume");
  const double c = std::pow(v, -2.0 / g.grid.dim);
  MetricField out = g;
  for (double& x : out.data) x *= c;
  // The multiplicative factor is itself rounded, which leaves the volume off
  // by a few 1e-16. Identity checks difference unit-volume quantities against
  // this metric's volume element and divide by small curve parameters, so
  // polish with additive corrections whose rounding is relative to the
  // correction rather than to the metric entries.
  const double cv = g.grid.cell_volume();
  for (int polish = 0; polish < 3; ++polish) {
    // residual formed inside the compensated accumulator so it is not
    // quantized at the ulp of the volume itself
    GeometryCache cache(out);
    NeumaierSum s;
    for (double v : cache.sqrt_det()) s.add(v);
    const double r = std::fma(s.s, cv, -1.0) + s.c * cv;
    if (std::fabs(r) <= 1e-16) break;
    const double delta = -2.0 * r / g.grid.dim;
    for (double& x : out.data) x = std::fma(delta, x, x);
  }
  return out;
}

ScalarField tensor_inner(const GeometryCache& geo, const SymTensorField& A,
                         const SymTensorField& B) {
  detail::check_same_grid(geo.grid(), A.grid, "tensor_inner");
  detail::check_same_grid(geo.grid(), B.grid, "tensor_inner");
  const int n = geo.grid().dim;
  ScalarField out(geo.grid());
  for (std::int64_t p = 0; p < out.num_points(); ++p) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            sum += geo.inverse().comp(p, i, k) * geo.inverse().comp(p, j, l) *
                   A.comp(p, i, j) * B.comp(p, k, l);
    out(p) = sum;
  }
  return out;
}

ScalarField phi_map(const MetricField& g) {
  GeometryCache geo(g);
  return laplace_beltrami(geo, curvature(geo).s);
}

ThreeTensorField cotton3(const MetricField& g) {
  if (g.grid.dim != 3)
    throw std::invalid_argument("cotton3: unsupported dimension (needs dim = 3)");
  GeometryCache geo(g);
  const PeriodicGrid& gr = g.grid;
  const int n = 3;
  const int nn = sym_count(n);
  const std::int64_t np = gr.size();

  CurvatureResult cur = curvature(geo);
  SymTensorField A(gr);  // Schouten-type tensor Ric - (s/4) g
  for (std::int64_t p = 0; p < np; ++p)
    for (int c = 0; c < nn; ++c) A(p, c) = cur.ric(p, c) - 0.25 * cur.s(p) * g(p, c);

  std::vector<std::vector<double>> dA(n);
  for (int k = 0; k < n; ++k) {
    dA[k].resize(static_cast<size_t>(np) * nn);
    for (int c = 0; c < nn; ++c) {
      auto dc = d1(gr, extract_comp(gr, A.data, nn, c), k);
      for (std::int64_t p = 0; p < np; ++p) dA[k][p * nn + c] = dc[p];
    }
  }

  auto covd = [&](std::int64_t p, int i, int j, int k) {
    double v = dA[i][p * nn + sym_index(n, j, k)];
    for (int l = 0; l < n; ++l)
      v -= geo.christoffel(p, l, i, j) * A.comp(p, l, k) +
           geo.christoffel(p, l, i, k) * A.comp(p, j, l);
    return v;
  };

  ThreeTensorField out(gr);
  for (std::int64_t p = 0; p < np; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = 0; k < n; ++k)
          out.comp_ref(p, i, j, k) = covd(p, i, j, k) - covd(p, j, i, k);
  return out;
}

double linf_norm(const std::vector<double>& data) {
  double m = 0.0;
  for (double v : data) m = std::max(m, std::fabs(v));
  return m;
}

double l2_norm(const GeometryCache& geo, const ScalarField& f) {
  ScalarField sq(f.grid);
  for (std::int64_t p = 0; p < f.num_points(); ++p) sq(p) = f(p) * f(p);
  return std::sqrt(integrate(geo, sq));
}

double l2_norm(const GeometryCache& geo, const SymTensorField& T) {
  return std::sqrt(integrate(geo, tensor_inner(geo, T, T)));
}

}  // namespace yamabe
