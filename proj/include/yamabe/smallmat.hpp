#pragma once

// Small dense symmetric-matrix kernels used in the pointwise tensor loops.
// Dimensions are tiny (n <= 8) and known per grid, so everything lives on
// the stack and the hot loops stay allocation-free.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace yamabe {

constexpr int kMaxDim = 8;

using SmallMat = std::array<double, kMaxDim * kMaxDim>;
using SmallVec = std::array<double, kMaxDim>;

inline double& at(SmallMat& m, int n, int i, int j) { return m[i * n + j]; }
inline double at(const SmallMat& m, int n, int i, int j) { return m[i * n + j]; }

// Gauss-Jordan inverse with partial pivoting. Returns det(a).
inline double invert(const SmallMat& a, int n, SmallMat& inv) {
  SmallMat work = a;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) at(inv, n, i, j) = (i == j) ? 1.0 : 0.0;
  double det = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::fabs(at(work, n, col, col));
    for (int r = col + 1; r < n; ++r) {
      double v = std::fabs(at(work, n, r, col));
      if (v > best) { best = v; piv = r; }
    }
    if (best == 0.0) throw std::runtime_error("smallmat: singular matrix");
    if (piv != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(work[piv * n + j], work[col * n + j]);
        std::swap(inv[piv * n + j], inv[col * n + j]);
      }
      det = -det;
    }
    double d = at(work, n, col, col);
    det *= d;
    double dinv = 1.0 / d;
    for (int j = 0; j < n; ++j) {
      work[col * n + j] *= dinv;
      inv[col * n + j] *= dinv;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = at(work, n, r, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        work[r * n + j] -= f * work[col * n + j];
        inv[r * n + j] -= f * inv[col * n + j];
      }
    }
  }
  return det;
}

// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
inline double min_eigenvalue_sym(const SmallMat& a, int n) {
  SmallMat m = a;
  for (int sweep = 0; sweep < 32; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += at(m, n, i, j) * at(m, n, i, j);
    if (off < 1e-28) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = at(m, n, p, q);
        if (std::fabs(apq) < 1e-300) continue;
        double app = at(m, n, p, p), aqq = at(m, n, q, q);
        double theta = 0.5 * (aqq - app) / apq;
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          double mkp = at(m, n, k, p), mkq = at(m, n, k, q);
          at(m, n, k, p) = c * mkp - s * mkq;
          at(m, n, k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          double mpk = at(m, n, p, k), mqk = at(m, n, q, k);
          at(m, n, p, k) = c * mpk - s * mqk;
          at(m, n, q, k) = s * mpk + c * mqk;
        }
      }
    }
  }
  double lam = at(m, n, 0, 0);
  for (int i = 1; i < n; ++i) lam = std::min(lam, at(m, n, i, i));
  return lam;
}

}  // namespace yamabe
