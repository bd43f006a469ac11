#pragma once

// Periodic structured grids (torus topology) and the tensor fields living on
// them. Point storage is row-major with the last axis fastest; symmetric
// 2-tensor components are stored lexicographically over index pairs (i <= j).

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "yamabe/smallmat.hpp"

namespace yamabe {

struct PeriodicGrid {
  int dim = 0;
  std::vector<int> points;     // points per axis, each >= 8 and even
  std::vector<double> periods; // coordinate period per axis

  PeriodicGrid() = default;
  PeriodicGrid(std::vector<int> pts, std::vector<double> per)
      : dim(static_cast<int>(pts.size())), points(std::move(pts)),
        periods(std::move(per)) {
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("grid: bad dimension");
    if (periods.size() != static_cast<size_t>(dim))
      throw std::invalid_argument("grid: periods/points length mismatch");
    for (int d = 0; d < dim; ++d) {
      if (points[d] < 8 || points[d] % 2 != 0)
        throw std::invalid_argument("grid: points per axis must be even and >= 8");
      if (!(periods[d] > 0.0)) throw std::invalid_argument("grid: period must be positive");
    }
  }

  // Uniform cube grid helper.
  static PeriodicGrid cube(int dim, int n, double period) {
    return PeriodicGrid(std::vector<int>(dim, n), std::vector<double>(dim, period));
  }

  std::int64_t size() const {
    std::int64_t s = 1;
    for (int d = 0; d < dim; ++d) s *= points[d];
    return s;
  }
  double spacing(int axis) const { return periods[axis] / points[axis]; }
  double cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < dim; ++d) v *= spacing(d);
    return v;
  }
  std::int64_t stride(int axis) const {
    std::int64_t s = 1;
    for (int d = axis + 1; d < dim; ++d) s *= points[d];
    return s;
  }
  void coords(std::int64_t p, int* idx) const {
    for (int d = dim - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(p % points[d]);
      p /= points[d];
    }
  }
  double coordinate(int idx, int axis) const { return idx * spacing(axis); }

  bool operator==(const PeriodicGrid& o) const {
    return dim == o.dim && points == o.points && periods == o.periods;
  }
  bool operator!=(const PeriodicGrid& o) const { return !(*this == o); }
};

inline int sym_count(int n) { return n * (n + 1) / 2; }

// Index of (i,j), i<=j, in the lexicographic symmetric layout.
inline int sym_index(int n, int i, int j) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i - 1) / 2 + (j - i);
}

namespace detail {
inline void check_same_grid(const PeriodicGrid& a, const PeriodicGrid& b,
                            const char* what) {
  if (a != b) throw std::invalid_argument(std::string("grid mismatch in ") + what);
}
}  // namespace detail

template <int RankTag>
struct FieldBase {
  PeriodicGrid grid;
  int ncomp = 1;
  std::vector<double> data;  // data[p * ncomp + c]

  FieldBase() = default;
  FieldBase(PeriodicGrid g, int nc)
      : grid(std::move(g)), ncomp(nc), data(static_cast<size_t>(grid.size()) * nc, 0.0) {}

  double& operator()(std::int64_t p, int c = 0) { return data[p * ncomp + c]; }
  double operator()(std::int64_t p, int c = 0) const { return data[p * ncomp + c]; }
  std::int64_t num_points() const { return grid.size(); }
};

struct ScalarField : FieldBase<0> {
  ScalarField() = default;
  explicit ScalarField(const PeriodicGrid& g) : FieldBase(g, 1) {}
};

struct OneFormField : FieldBase<1> {
  OneFormField() = default;
  explicit OneFormField(const PeriodicGrid& g) : FieldBase(g, g.dim) {}
};

// Symmetric 2-tensor field; components (i<=j) lexicographic.
struct SymTensorField : FieldBase<2> {
  SymTensorField() = default;
  explicit SymTensorField(const PeriodicGrid& g) : FieldBase(g, sym_count(g.dim)) {}

  double comp(std::int64_t p, int i, int j) const {
    return (*this)(p, sym_index(grid.dim, i, j));
  }
  double& comp(std::int64_t p, int i, int j) {
    return (*this)(p, sym_index(grid.dim, i, j));
  }
  void fill_matrix(std::int64_t p, SmallMat& m) const {
    const int n = grid.dim;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        at(m, n, i, j) = at(m, n, j, i) = comp(p, i, j);
  }
};

// The discrete Riemannian metric: a SymTensorField required to be SPD
// pointwise. Validity is enforced where the geometry cache is built
// (eigenvalue floor 1e-8).
struct MetricField : SymTensorField {
  MetricField() = default;
  explicit MetricField(const PeriodicGrid& g) : SymTensorField(g) {}
  static MetricField flat(const PeriodicGrid& g) {
    MetricField m(g);
    for (std::int64_t p = 0; p < m.num_points(); ++p)
      for (int i = 0; i < g.dim; ++i) m.comp(p, i, i) = 1.0;
    return m;
  }
};

// Rank-3 field antisymmetric in the first two slots: components stored as
// (pair i<j) x k, pair index lexicographic.
struct ThreeTensorField : FieldBase<3> {
  ThreeTensorField() = default;
  explicit ThreeTensorField(const PeriodicGrid& g)
      : FieldBase(g, g.dim * (g.dim - 1) / 2 * g.dim) {}

  static int pair_index(int n, int i, int j) {  // requires i < j
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  }
  // T_{ijk}; antisymmetry in (i,j) is implicit in the storage.
  double comp(std::int64_t p, int i, int j, int k) const {
    if (i == j) return 0.0;
    double sign = 1.0;
    if (i > j) { std::swap(i, j); sign = -1.0; }
    const int n = grid.dim;
    return sign * (*this)(p, pair_index(n, i, j) * n + k);
  }
  double& comp_ref(std::int64_t p, int i, int j, int k) {  // requires i < j
    const int n = grid.dim;
    return (*this)(p, pair_index(n, i, j) * n + k);
  }
};

}  // namespace yamabe
