#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace seer {

using Vec = std::vector<double>;

// Row-major dense matrix, just enough for the nets in this project.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return a.size(); }

  bool operator==(const Mat&) const = default;
};

// out = m x
inline void matvec(const Mat& m, const Vec& x, Vec& out) {
  assert(static_cast<int>(x.size()) == m.cols);
  out.assign(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    const double* row = &m.a[static_cast<size_t>(r) * m.cols];
    double acc = 0.0;
    for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

// out += m x
inline void matvec_add(const Mat& m, const Vec& x, Vec& out) {
  assert(static_cast<int>(x.size()) == m.cols);
  assert(static_cast<int>(out.size()) == m.rows);
  for (int r = 0; r < m.rows; ++r) {
    const double* row = &m.a[static_cast<size_t>(r) * m.cols];
    double acc = 0.0;
    for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    out[r] += acc;
  }
}

// out += m^T x
inline void matvec_transpose_add(const Mat& m, const Vec& x, Vec& out) {
  assert(static_cast<int>(x.size()) == m.rows);
  assert(static_cast<int>(out.size()) == m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = &m.a[static_cast<size_t>(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) out[c] += row[c] * xr;
  }
}

// g += d x^T
inline void outer_add(const Vec& d, const Vec& x, Mat& g) {
  assert(static_cast<int>(d.size()) == g.rows);
  assert(static_cast<int>(x.size()) == g.cols);
  for (int r = 0; r < g.rows; ++r) {
    const double dr = d[r];
    if (dr == 0.0) continue;
    double* row = &g.a[static_cast<size_t>(r) * g.cols];
    for (int c = 0; c < g.cols; ++c) row[c] += dr * x[c];
  }
}

inline void vec_add(const Vec& x, Vec& out) {
  assert(x.size() == out.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] += x[i];
}

}  // namespace seer
