#include "yamabe/product.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "yamabe/stencil.hpp"

namespace yamabe {

namespace {

using Mat = Eigen::MatrixXd;
using EVec = Eigen::VectorXd;
using Vec = std::vector<double>;

Vec circle_d1(int m, double period, const Vec& f) {
  return d1(PeriodicGrid({m}, {period}), f, 0);
}
Vec circle_d2(int m, double period, const Vec& f) {
  return d2(PeriodicGrid({m}, {period}), f, 0);
}

void check_positive(const Vec& phi, const char* what) {
  for (double v : phi)
    if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + ": phi must be positive");
}

// dense 4th-order periodic derivative matrices
Mat dense_d2(int m, double h) {
  Mat D = Mat::Zero(m, m);
  const double c = 1.0 / (12.0 * h * h);
  const double coef[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};
  for (int i = 0; i < m; ++i)
    for (int o = -2; o <= 2; ++o) D(i, ((i + o) % m + m) % m) += c * coef[o + 2];
  return D;
}
Mat dense_d1(int m, double h) {
  Mat D = Mat::Zero(m, m);
  const double c = 1.0 / (12.0 * h);
  const double coef[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
  for (int i = 0; i < m; ++i)
    for (int o = -2; o <= 2; ++o) D(i, ((i + o) % m + m) % m) += c * coef[o + 2];
  return D;
}

double mean(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

}  // namespace

void ProductGeometry::validate() const {
  if (n < 3) throw std::invalid_argument("ProductGeometry: need n >= 3");
  if (!(L > 0.0)) throw std::invalid_argument("ProductGeometry: L must be positive");
  if (m < 64 || m % 2 != 0)
    throw std::invalid_argument("ProductGeometry: m must be even and >= 64");
}

double ProductGeometry::sphere_volume() const {
  return 2.0 * std::pow(M_PI, n / 2.0) / std::tgamma(n / 2.0);
}

double ProductGeometry::bifurcation_length(int k) const {
  return 2.0 * M_PI * k / std::sqrt(double(n - 2));
}

std::vector<double> ode_residual(const ProductGeometry& geom, const Vec& phi,
                                 double s) {
  geom.validate();
  if (static_cast<int>(phi.size()) != geom.m)
    throw std::invalid_argument("ode_residual: sample count mismatch");
  check_positive(phi, "ode_residual");
  const auto k = yamabe_constants(geom.n);
  const double a = geom.sphere_scalar();
  Vec r = circle_d2(geom.m, geom.L, phi);
  for (int j = 0; j < geom.m; ++j)
    r[j] = -k.c_n * r[j] + a * phi[j] - s * std::pow(phi[j], k.q);
  return r;
}

std::vector<double> ode_residual_spectral(const ProductGeometry& geom,
                                          const Vec& phi, double s) {
  geom.validate();
  if (static_cast<int>(phi.size()) != geom.m)
    throw std::invalid_argument("ode_residual_spectral: sample count mismatch");
  check_positive(phi, "ode_residual_spectral");
  const int m = geom.m;
  // direct DFT second derivative (m is small; no fft dependency needed)
  Vec dd(m, 0.0);
  for (int kk = 0; kk <= m / 2; ++kk) {
    double a = 0.0, b = 0.0;
    for (int j = 0; j < m; ++j) {
      const double ang = 2.0 * M_PI * kk * j / m;
      a += phi[j] * std::cos(ang);
      b += phi[j] * std::sin(ang);
    }
    const double scale = (kk == 0 || kk == m / 2) ? 1.0 / m : 2.0 / m;
    const double w = 2.0 * M_PI * kk / geom.L;
    for (int j = 0; j < m; ++j) {
      const double ang = 2.0 * M_PI * kk * j / m;
      dd[j] -= w * w * scale * (a * std::cos(ang) + b * std::sin(ang));
    }
  }
  const auto k = yamabe_constants(geom.n);
  const double sc = geom.sphere_scalar();
  Vec r(m);
  for (int j = 0; j < m; ++j)
    r[j] = -k.c_n * dd[j] + sc * phi[j] - s * std::pow(phi[j], k.q);
  return r;
}

namespace {

// Shared fixed-L Newton: unknowns (phi, s, nu) with the normalization
// mean(phi^{2n/(n-2)}) = 1 and a translation phase condition anchored at the
// initial guess (nu multiplies the translation generator and vanishes at
// solutions; for constant anchors the phase row becomes nu = 0).
struct FixedLResult {
  Vec phi;
  double s = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual_linf = 0.0;
};

FixedLResult newton_fixed_L(const ProductGeometry& geom, const Vec& init,
                            double s_init, double tol, int max_newton) {
  const int m = geom.m;
  const auto kc = yamabe_constants(geom.n);
  const double a = geom.sphere_scalar();
  const double kf = 2.0 * geom.n / (geom.n - 2);
  const double h = geom.spacing();
  const Mat D2 = dense_d2(m, h);
  const Mat D1 = dense_d1(m, h);

  EVec phi = Eigen::Map<const EVec>(init.data(), m);
  double s = s_init, nu = 0.0;
  EVec ref_d = D1 * phi;  // phase anchor direction
  const bool anchored = ref_d.norm() / std::sqrt(double(m)) > 1e-10;
  const EVec phi_ref = phi;

  FixedLResult out;
  for (int it = 0; it < max_newton; ++it) {
    EVec pq(m), pqm1(m), pkf(m);
    for (int j = 0; j < m; ++j) {
      pq[j] = std::pow(phi[j], kc.q);
      pqm1[j] = std::pow(phi[j], kc.q - 1.0);
      pkf[j] = std::pow(phi[j], kf);
    }
    EVec dphi = D1 * phi;
    EVec R(m + 2);
    R.head(m) = -kc.c_n * (D2 * phi) + a * phi - s * pq + nu * dphi;
    R[m] = pkf.mean() - 1.0;
    R[m + 1] = anchored ? ref_d.dot(phi - phi_ref) / m : nu;

    out.residual_linf = (R.head(m) - nu * dphi).lpNorm<Eigen::Infinity>();
    if (out.residual_linf <= tol && std::fabs(R[m]) <= 1e-13 &&
        std::fabs(R[m + 1]) <= 1e-11 && std::fabs(nu) <= 1e-9) {
      out.converged = true;
      break;
    }

    Mat J = Mat::Zero(m + 2, m + 2);
    J.topLeftCorner(m, m) = -kc.c_n * D2 + nu * D1;
    for (int j = 0; j < m; ++j) {
      J(j, j) += a - kc.q * s * pqm1[j];
      J(j, m) = -pq[j];
      J(m, j) = kf * pq[j] / m;
    }
    J.col(m + 1).head(m) = dphi;
    if (anchored)
      J.row(m + 1).head(m) = ref_d.transpose() / m;
    else
      J(m + 1, m + 1) = 1.0;

    EVec step = J.partialPivLu().solve(-R);
    if (!step.allFinite()) break;

    double alpha = 1.0;
    for (int j = 0; j < m; ++j)
      if (step[j] < 0.0) alpha = std::min(alpha, -0.9 * phi[j] / step[j]);
    const double merit0 = R.squaredNorm();
    bool moved = false;
    while (alpha > 1e-12) {
      EVec pc = phi + alpha * step.head(m);
      const double sc = s + alpha * step[m];
      const double nc = nu + alpha * step[m + 1];
      EVec Rc(m + 2);
      EVec pcq(m), pckf(m);
      for (int j = 0; j < m; ++j) {
        pcq[j] = std::pow(pc[j], kc.q);
        pckf[j] = std::pow(pc[j], kf);
      }
      Rc.head(m) = -kc.c_n * (D2 * pc) + a * pc - sc * pcq + nc * (D1 * pc);
      Rc[m] = pckf.mean() - 1.0;
      Rc[m + 1] = anchored ? ref_d.dot(pc - phi_ref) / m : nc;
      if (Rc.squaredNorm() < merit0) {
        phi = pc;
        s = sc;
        nu = nc;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    ++out.iterations;
    if (!moved) break;
  }
  out.phi.assign(phi.data(), phi.data() + m);
  out.s = s;
  return out;
}

ProductSolution package(const ProductGeometry& geom, FixedLResult r) {
  ProductSolution sol;
  sol.geometry = geom;
  sol.converged = r.converged;
  sol.iterations = r.iterations;
  sol.s_ode = r.s;
  sol.residual_linf = r.residual_linf;

  // phase-normalize: cyclic shift so the maximum sits at index 0
  const int m = geom.m;
  int arg = 0;
  for (int j = 1; j < m; ++j)
    if (r.phi[j] > r.phi[arg]) arg = j;
  sol.phase = arg;
  sol.phi.resize(m);
  for (int j = 0; j < m; ++j) sol.phi[j] = r.phi[(j + arg) % m];

  double lo = sol.phi[0], hi = sol.phi[0];
  for (double v : sol.phi) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  sol.is_constant = (hi - lo) <= 1e-8;

  // unit-volume bookkeeping: with mean(phi^{2n/(n-2)}) = 1 the conformal
  // volume is omega_{n-1} L, and the total-curvature value is scale-invariant
  const double v = geom.sphere_volume() * geom.L;
  sol.energy = r.s * std::pow(v, 2.0 / geom.n);
  sol.s_const = sol.energy;
  return sol;
}

// Smallest eigenvalue of the symmetric ODE Jacobian restricted to the
// directions the continuation actually moves in: orthogonal to the volume
// constraint gradient (phi^q) and to the translation generator (phi'). The
// excluded directions are pushed to a large positive shift so the constrained
// minimum is exact.
// negative-eigenvalue count (constrained Morse index); a change along the
// branch brackets a singular crossing even after earlier modes went unstable
int monitored_index(const ProductGeometry& geom, const Vec& phi, double s) {
  const int m = geom.m;
  const auto kc = yamabe_constants(geom.n);
  const double a = geom.sphere_scalar();
  Mat J = -kc.c_n * dense_d2(m, geom.spacing());
  for (int j = 0; j < m; ++j) J(j, j) += a - kc.q * s * std::pow(phi[j], kc.q - 1.0);

  Mat P = Mat::Identity(m, m);
  EVec c(m);
  for (int j = 0; j < m; ++j) c[j] = std::pow(phi[j], kc.q);
  c.normalize();
  P -= c * c.transpose();
  Vec dphi = circle_d1(m, geom.L, phi);
  EVec t = Eigen::Map<EVec>(dphi.data(), m);
  t -= c.dot(t) * c;
  if (t.norm() / std::sqrt(double(m)) > 1e-8) {
    t.normalize();
    P -= t * t.transpose();
  }
  const double shift = 1e6;
  Mat M = P * J * P + shift * (Mat::Identity(m, m) - P);
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  int count = 0;
  for (int i = 0; i < m; ++i)
    if (es.eigenvalues()[i] < 0.0) ++count;
  return count;
}

}  // namespace

ProductSolution solve_product(const ProductGeometry& geom, const Vec& init,
                              double s_init, double tol, int max_newton) {
  geom.validate();
  if (static_cast<int>(init.size()) != geom.m)
    throw std::invalid_argument("solve_product: init sample count mismatch");
  check_positive(init, "solve_product");
  // start on the normalization manifold
  Vec start = init;
  const double kf = 2.0 * geom.n / (geom.n - 2);
  double mn = 0.0;
  for (double v : start) mn += std::pow(v, kf);
  const double lam = std::pow(mn / geom.m, -1.0 / kf);
  for (auto& v : start) v *= lam;
  return package(geom, newton_fixed_L(geom, start, s_init, tol, max_newton));
}

ProductSolution orbit_translate(const ProductSolution& sol, int shift) {
  const int m = sol.geometry.m;
  ProductSolution out = sol;
  shift = ((shift % m) + m) % m;
  for (int j = 0; j < m; ++j) out.phi[j] = sol.phi[(j + shift) % m];
  out.phase = (sol.phase + shift) % m;
  return out;
}

SolutionBranch continue_branch(const ProductGeometry& geom, double L_end,
                               const ProductSolution& seed,
                               const ContinuationOptions& opt) {
  geom.validate();
  if (!seed.converged) throw std::invalid_argument("continue_branch: seed not converged");
  const int m = geom.m;
  const auto kc = yamabe_constants(geom.n);
  const double a = geom.sphere_scalar();
  const double kf = 2.0 * geom.n / (geom.n - 2);
  const double L1 = geom.bifurcation_length(1);
  const double dir = (L_end >= seed.geometry.L) ? 1.0 : -1.0;

  // tau in [0,1) formulation: phi'' in theta = phi_tautau / L^2
  const Mat D2t = dense_d2(m, 1.0 / m);
  const Mat D1t = dense_d1(m, 1.0 / m);

  auto geom_at = [&](double L) {
    ProductGeometry g = geom;
    g.L = L;
    return g;
  };
  auto solve_at = [&](double L, const Vec& init, double s_init) {
    return solve_product(geom_at(L), init, s_init, opt.ode_tol, opt.max_newton);
  };

  SolutionBranch br;
  br.branch_type = seed.is_constant ? "constant" : "bifurcated";
  br.samples.push_back(seed);
  br.samples.back().geometry = geom_at(seed.geometry.L);

  int idx_prev = monitored_index(seed.geometry, seed.phi, seed.s_ode);

  // second point by a small natural step, then secant predictors
  double step = 0.02 * L1;
  const double step_min = opt.step_min_frac * L1;
  const double step_max = opt.step_max_frac * L1;

  auto state_of = [&](const ProductSolution& s) {
    EVec x(m + 2);
    for (int j = 0; j < m; ++j) x[j] = s.phi[j];
    x[m] = s.s_ode;
    x[m + 1] = s.geometry.L;
    return x;
  };

  // pseudo-arclength corrector at predicted state
  auto corrector = [&](EVec x_pred, const EVec& tangent, FixedLResult& res,
                       double& L_out) {
    EVec phi = x_pred.head(m);
    double s = x_pred[m], L = x_pred[m + 1], nu = 0.0;
    EVec ref_d = D1t * phi;
    const bool anchored = ref_d.norm() / std::sqrt(double(m)) > 1e-10;
    res.converged = false;
    for (int it = 0; it < opt.max_newton; ++it) {
      if (!(L > 0.0)) return;
      for (int j = 0; j < m; ++j)
        if (!(phi[j] > 0.0)) return;
      EVec pq(m), pqm1(m), pkf(m);
      for (int j = 0; j < m; ++j) {
        pq[j] = std::pow(phi[j], kc.q);
        pqm1[j] = std::pow(phi[j], kc.q - 1.0);
        pkf[j] = std::pow(phi[j], kf);
      }
      EVec ptau2 = D2t * phi;
      EVec dphi = D1t * phi;
      EVec R(m + 3);
      R.head(m) = -(kc.c_n / (L * L)) * ptau2 + a * phi - s * pq + nu * dphi;
      R[m] = pkf.mean() - 1.0;
      R[m + 1] = anchored ? ref_d.dot(phi - x_pred.head(m)) / m : nu;
      EVec dx(m + 2);
      dx.head(m) = phi - x_pred.head(m);
      dx[m] = s - x_pred[m];
      dx[m + 1] = L - x_pred[m + 1];
      EVec tview(m + 2);
      tview = tangent;
      R[m + 2] = tview.head(m).dot(dx.head(m)) / m + tview[m] * dx[m] +
                 tview[m + 1] * dx[m + 1];

      res.residual_linf = (R.head(m) - nu * dphi).lpNorm<Eigen::Infinity>();
      if (res.residual_linf <= opt.ode_tol && std::fabs(R[m]) <= 1e-13 &&
          std::fabs(nu) <= 1e-9) {
        res.converged = true;
        break;
      }

      Mat J = Mat::Zero(m + 3, m + 3);
      J.topLeftCorner(m, m) = -(kc.c_n / (L * L)) * D2t + nu * D1t;
      for (int j = 0; j < m; ++j) {
        J(j, j) += a - kc.q * s * pqm1[j];
        J(j, m) = -pq[j];
        J(j, m + 1) = 2.0 * kc.c_n / (L * L * L) * ptau2[j];
        J(m, j) = kf * pq[j] / m;
        J(m + 2, j) = tview[j] / m;
      }
      J.col(m + 2).head(m) = dphi;
      if (anchored)
        J.row(m + 1).head(m) = ref_d.transpose() / m;
      else
        J(m + 1, m + 2) = 1.0;
      J(m + 2, m) = tview[m];
      J(m + 2, m + 1) = tview[m + 1];

      EVec stepv = J.partialPivLu().solve(-R);
      if (!stepv.allFinite()) return;
      phi += stepv.head(m);
      s += stepv[m];
      L += stepv[m + 1];
      nu += stepv[m + 2];
      ++res.iterations;
    }
    res.phi.assign(phi.data(), phi.data() + m);
    res.s = s;
    L_out = L;
  };

  auto bisect = [&](double La, double Lb, Vec pa, double sa, const Vec& pb, double sb,
                    int idx_a) {
    Vec pa_loc = std::move(pa);
    double sa_loc = sa;
    (void)sb;
    while (Lb - La > opt.bisect_tol || La - Lb > opt.bisect_tol) {
      const double Lm = 0.5 * (La + Lb);
      Vec init(m);
      for (int j = 0; j < m; ++j) init[j] = 0.5 * (pa_loc[j] + pb[j]);
      auto mid = solve_at(Lm, init, sa_loc);
      if (!mid.converged) break;
      const int idx_m = monitored_index(mid.geometry, mid.phi, mid.s_ode);
      if (idx_m == idx_a) {
        La = Lm;
        pa_loc = mid.phi;
        sa_loc = mid.s_ode;
      } else {
        Lb = Lm;
      }
      if (std::fabs(Lb - La) <= opt.bisect_tol) break;
    }
    br.bifurcation_points.push_back(0.5 * (La + Lb));
  };

  // first natural step
  {
    double L0 = seed.geometry.L;
    double Lnext = L0 + dir * std::min(step, std::fabs(L_end - L0));
    auto s1 = solve_at(Lnext, br.samples.back().phi, br.samples.back().s_ode);
    if (!s1.converged) {
      br.truncated = true;
      br.diagnostic = "first continuation step failed";
      return br;
    }
    const int idx = monitored_index(s1.geometry, s1.phi, s1.s_ode);
    if (idx != idx_prev)
      bisect(L0, Lnext, br.samples.back().phi, br.samples.back().s_ode, s1.phi,
             s1.s_ode, idx_prev);
    idx_prev = idx;
    br.samples.push_back(s1);
    if (std::fabs(Lnext - L_end) < 1e-12) return br;
  }

  for (int k = 0; k < opt.max_steps; ++k) {
    const ProductSolution& cur = br.samples.back();
    const ProductSolution& prev = br.samples[br.samples.size() - 2];
    if (dir * (cur.geometry.L - L_end) >= -1e-12) break;

    EVec xc = state_of(cur), xp = state_of(prev);
    EVec tangent = xc - xp;
    const double tn = std::sqrt(tangent.head(m).squaredNorm() / m +
                                tangent[m] * tangent[m] +
                                tangent[m + 1] * tangent[m + 1]);
    tangent /= tn;

    bool accepted = false;
    while (step >= step_min) {
      double remaining = std::fabs(L_end - cur.geometry.L);
      double ds = step;
      if (std::fabs(tangent[m + 1]) > 1e-12)
        ds = std::min(ds, remaining / std::fabs(tangent[m + 1]));
      EVec x_pred = xc + ds * tangent;
      FixedLResult res;
      double L_out = x_pred[m + 1];
      corrector(x_pred, tangent, res, L_out);
      if (res.converged && L_out > 0.0) {
        auto sol = package(geom_at(L_out), res);
        const int idx = monitored_index(sol.geometry, sol.phi, sol.s_ode);
        if (idx != idx_prev)
          bisect(cur.geometry.L, L_out, cur.phi, cur.s_ode, sol.phi, sol.s_ode,
                 idx_prev);
        idx_prev = idx;
        br.samples.push_back(sol);
        if (res.iterations <= 6) step = std::min(step * 1.4, step_max);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (step < 1e-6) {
        br.truncated = true;
        br.diagnostic = "arclength step collapsed below 1e-6";
      } else {
        br.truncated = true;
        br.diagnostic = "corrector failed at minimal step";
      }
      return br;
    }
  }

  // land exactly on L_end with a fixed-L polish
  if (std::fabs(br.samples.back().geometry.L - L_end) > 1e-10) {
    auto last = solve_at(L_end, br.samples.back().phi, br.samples.back().s_ode);
    if (last.converged)
      br.samples.push_back(last);
    else {
      br.truncated = true;
      br.diagnostic = "final fixed-L polish failed";
    }
  }
  return br;
}

SolutionBranch branch_switch(const ProductGeometry& geom, double L_bif, double L_end,
                             const ContinuationOptions& opt) {
  geom.validate();
  const int m = geom.m;
  const auto kc = yamabe_constants(geom.n);
  const double a = geom.sphere_scalar();

  // critical eigenvector of the constant state at the singular point
  ProductGeometry gb = geom;
  gb.L = L_bif;
  Mat J = -kc.c_n * dense_d2(m, gb.spacing());
  for (int j = 0; j < m; ++j) J(j, j) += a * (1.0 - kc.q);
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  int imin = 0;
  for (int i = 1; i < m; ++i)
    if (std::fabs(es.eigenvalues()[i]) < std::fabs(es.eigenvalues()[imin])) imin = i;
  EVec v = es.eigenvectors().col(imin);
  v /= v.lpNorm<Eigen::Infinity>();

  const double dir = (L_end >= L_bif) ? 1.0 : -1.0;
  const double delta = 0.02 * geom.bifurcation_length(1);
  ProductGeometry g0 = geom;
  g0.L = L_bif + dir * delta;
  Vec init(m);
  for (int j = 0; j < m; ++j) init[j] = 1.0 + 0.1 * v[j];
  auto seed = solve_product(g0, init, a, opt.ode_tol, opt.max_newton);

  SolutionBranch br;
  if (!seed.converged || seed.is_constant) {
    br.truncated = true;
    br.diagnostic = "branch switch failed to leave the constant branch";
    return br;
  }
  br = continue_branch(geom, L_end, seed, opt);

  // label by the azimuthal mode count of the profile
  int crossings = 0;
  const auto& phi = br.samples.back().phi;
  const double mu = mean(phi);
  for (int j = 0; j < m; ++j)
    if ((phi[j] - mu > 0) != (phi[(j + 1) % m] - mu > 0)) ++crossings;
  br.branch_type = "bifurcated-" + std::to_string(std::max(1, crossings / 2));
  return br;
}

std::vector<ProductSolution> enumerate_yamabe(const ProductGeometry& geom, double tol) {
  geom.validate();
  const int m = geom.m;
  const double a = geom.sphere_scalar();
  std::vector<ProductSolution> out;

  Vec ones(m, 1.0);
  auto cst = solve_product(geom, ones, a, tol);
  if (cst.converged) out.push_back(cst);

  for (int k = 1;; ++k) {
    const double Lk = geom.bifurcation_length(k);
    if (Lk >= geom.L - 1e-9) break;
    Vec init(m);
    for (int j = 0; j < m; ++j)
      init[j] = 1.0 + 0.3 * std::cos(2.0 * M_PI * k * j / m);
    auto sol = solve_product(geom, init, a, tol);
    if (!sol.converged || sol.is_constant) {
      // fall back to continuation from just past the singular point
      auto br = branch_switch(geom, Lk, geom.L);
      if (br.samples.empty() || br.truncated) continue;
      sol = br.samples.back();
      if (!sol.converged || sol.is_constant) continue;
    }
    bool dup = false;
    for (const auto& prev : out) {
      double d2s = 0.0;
      for (int j = 0; j < m; ++j) {
        const double d = sol.phi[j] - prev.phi[j];
        d2s += d * d;
      }
      if (std::sqrt(d2s / m) < 1e-6) dup = true;
    }
    if (!dup) out.push_back(sol);
  }

  std::sort(out.begin(), out.end(), [](const ProductSolution& x, const ProductSolution& y) {
    return x.energy < y.energy;
  });
  if (!out.empty()) {
    const double emin = out.front().energy;
    for (auto& s : out) s.is_yamabe = s.energy <= emin + 1e-8;
  }
  return out;
}

// ---- warped adapter -----------------------------------------------------

void WarpedMetric::validate() const {
  if (n < 3) throw std::invalid_argument("WarpedMetric: need n >= 3");
  if (!(L > 0.0)) throw std::invalid_argument("WarpedMetric: L must be positive");
  if (A.size() != B.size() || A.size() < 8 || A.size() % 2 != 0)
    throw std::invalid_argument("WarpedMetric: bad sample count");
  for (size_t j = 0; j < A.size(); ++j)
    if (!(A[j] > 0.0) || !(B[j] > 0.0))
      throw std::invalid_argument("WarpedMetric: coefficients must be positive");
}

WarpedTensor WarpedMetric::ricci() const {
  validate();
  const int mm = m();
  Vec dA = circle_d1(mm, L, A), dB = circle_d1(mm, L, B), ddB = circle_d2(mm, L, B);
  WarpedTensor r;
  r.theta.resize(mm);
  r.sphere.resize(mm);
  for (int j = 0; j < mm; ++j) {
    r.theta[j] = -(n - 1) * (ddB[j] / (2.0 * B[j]) - dB[j] * dB[j] / (4.0 * B[j] * B[j]) -
                             dA[j] * dB[j] / (4.0 * A[j] * B[j]));
    r.sphere[j] = (n - 2) - ddB[j] / (2.0 * A[j]) -
                  (n - 3) * dB[j] * dB[j] / (4.0 * A[j] * B[j]) +
                  dA[j] * dB[j] / (4.0 * A[j] * A[j]);
  }
  return r;
}

std::vector<double> WarpedMetric::scalar_curvature() const {
  WarpedTensor r = ricci();
  Vec s(m());
  for (int j = 0; j < m(); ++j)
    s[j] = r.theta[j] / A[j] + (n - 1) * r.sphere[j] / B[j];
  return s;
}

WarpedTensor WarpedMetric::trace_free_ricci() const {
  WarpedTensor r = ricci();
  Vec s(m());
  for (int j = 0; j < m(); ++j)
    s[j] = r.theta[j] / A[j] + (n - 1) * r.sphere[j] / B[j];
  for (int j = 0; j < m(); ++j) {
    r.theta[j] -= s[j] / n * A[j];
    r.sphere[j] -= s[j] / n * B[j];
  }
  return r;
}

WarpedTensor WarpedMetric::hessian(const Vec& f) const {
  validate();
  const int mm = m();
  if (static_cast<int>(f.size()) != mm)
    throw std::invalid_argument("WarpedMetric::hessian: sample count mismatch");
  Vec df = circle_d1(mm, L, f), ddf = circle_d2(mm, L, f), dA = circle_d1(mm, L, A),
      dB = circle_d1(mm, L, B);
  WarpedTensor h;
  h.theta.resize(mm);
  h.sphere.resize(mm);
  for (int j = 0; j < mm; ++j) {
    h.theta[j] = ddf[j] - dA[j] * df[j] / (2.0 * A[j]);
    h.sphere[j] = dB[j] * df[j] / (2.0 * A[j]);
  }
  return h;
}

std::vector<double> WarpedMetric::laplacian(const Vec& f) const {
  WarpedTensor h = hessian(f);
  Vec lap(m());
  for (int j = 0; j < m(); ++j)
    lap[j] = h.theta[j] / A[j] + (n - 1) * h.sphere[j] / B[j];
  return lap;
}

WarpedTensor WarpedMetric::trace_free_hessian(const Vec& f) const {
  WarpedTensor h = hessian(f);
  Vec lap(m());
  for (int j = 0; j < m(); ++j)
    lap[j] = h.theta[j] / A[j] + (n - 1) * h.sphere[j] / B[j];
  for (int j = 0; j < m(); ++j) {
    h.theta[j] -= lap[j] / n * A[j];
    h.sphere[j] -= lap[j] / n * B[j];
  }
  return h;
}

double WarpedMetric::volume() const {
  ProductGeometry g{n, L, m() >= 64 ? m() : 64};
  const double omega = g.sphere_volume();
  double s = 0.0;
  for (int j = 0; j < m(); ++j)
    s += std::sqrt(A[j] * std::pow(B[j], double(n - 1)));
  return omega * s * spacing();
}

double WarpedMetric::integrate(const Vec& f) const {
  ProductGeometry g{n, L, m() >= 64 ? m() : 64};
  const double omega = g.sphere_volume();
  double s = 0.0;
  for (int j = 0; j < m(); ++j)
    s += f[j] * std::sqrt(A[j] * std::pow(B[j], double(n - 1)));
  return omega * s * spacing();
}

std::vector<double> WarpedMetric::inner(const WarpedTensor& T, const WarpedTensor& h) const {
  Vec out(m());
  for (int j = 0; j < m(); ++j)
    out[j] = T.theta[j] * h.theta[j] / (A[j] * A[j]) +
             (n - 1) * T.sphere[j] * h.sphere[j] / (B[j] * B[j]);
  return out;
}

double WarpedMetric::conformal_circle_length() const {
  double s = 0.0;
  for (int j = 0; j < m(); ++j) s += std::sqrt(A[j] / B[j]);
  return s * spacing();
}

double WarpedMetric::yamabe_functional() const {
  const double v = volume();
  return std::pow(v, -double(n - 2) / n) * integrate(scalar_curvature());
}

WarpedMetric lift_product(const ProductGeometry& geom, const Vec& phi) {
  geom.validate();
  if (static_cast<int>(phi.size()) != geom.m)
    throw std::invalid_argument("lift_product: sample count mismatch");
  check_positive(phi, "lift_product");
  WarpedMetric w;
  w.n = geom.n;
  w.L = geom.L;
  w.A.resize(geom.m);
  w.B.resize(geom.m);
  for (int j = 0; j < geom.m; ++j)
    w.A[j] = w.B[j] = std::pow(phi[j], 4.0 / (geom.n - 2));
  return w;
}

WarpedTensor Z_phi_warped(const WarpedMetric& gamma, const Vec& phi) {
  gamma.validate();
  const int mm = gamma.m();
  if (static_cast<int>(phi.size()) != mm)
    throw std::invalid_argument("Z_phi_warped: sample count mismatch");
  check_positive(phi, "Z_phi_warped");
  const int n = gamma.n;
  Vec u(mm), uinv(mm);
  for (int j = 0; j < mm; ++j) {
    u[j] = std::pow(phi[j], 2.0 / (n - 2));
    uinv[j] = 1.0 / u[j];
  }
  WarpedTensor z = gamma.trace_free_ricci();
  WarpedTensor h0 = gamma.trace_free_hessian(uinv);
  WarpedTensor Z;
  Z.theta.resize(mm);
  Z.sphere.resize(mm);
  for (int j = 0; j < mm; ++j) {
    const double upow = phi[j] * phi[j];  // u^{n-2}
    Z.theta[j] = upow * (z.theta[j] + (n - 2) * u[j] * h0.theta[j]);
    Z.sphere[j] = upow * (z.sphere[j] + (n - 2) * u[j] * h0.sphere[j]);
  }
  return Z;
}

}  // namespace yamabe
