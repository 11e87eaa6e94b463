#include "lg/linalg.hpp"

#include <cmath>
#include <limits>

#include "lg/error.hpp"

namespace lg {

JVec solve_square(std::vector<JVec> A, JVec b) {
  const std::size_t n = b.size();
  if (A.size() != n) throw Error(ErrorKind::Shape, "solve_square: row count mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::fabs(A[i][col].value()) > std::fabs(A[piv][col].value())) piv = i;
    if (A[piv][col].value() == 0.0) throw Error(ErrorKind::Degeneracy, "solve_square: singular system");
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    const Jet inv = reciprocal(A[col][col]);
    for (std::size_t i = col + 1; i < n; ++i) {
      const Jet f = A[i][col] * inv;
      if (f.value() == 0.0 && f.vars() == 0) continue;
      for (std::size_t j = col; j < n; ++j) A[i][j] -= f * A[col][j];
      b[i] -= f * b[col];
    }
  }
  JVec x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    Jet acc = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) acc -= A[ii][j] * x[j];
    x[ii] = acc / A[ii][ii];
  }
  return x;
}

JVec solve_lsq(const std::vector<JVec>& cols, const JVec& b) {
  const std::size_t m = cols.size();
  std::vector<JVec> G(m, JVec(m));
  JVec rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) G[i][j] = G[j][i] = dot(cols[i], cols[j]);
    rhs[i] = dot(cols[i], b);
  }
  return solve_square(std::move(G), std::move(rhs));
}

double lsq_residual(const std::vector<JVec>& cols, const JVec& c, const JVec& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    double acc = -b[i].value();
    for (std::size_t j = 0; j < cols.size(); ++j) acc += c[j].value() * cols[j][i].value();
    worst = std::max(worst, std::fabs(acc));
  }
  return worst;
}

Jet dot(std::span<const Jet> a, std::span<const Jet> b) {
  Jet acc(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

JVec axpy(const Jet& a, std::span<const Jet> x, std::span<const Jet> y) {
  JVec out(y.begin(), y.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * x[i];
  return out;
}

JVec scaled(const Jet& a, std::span<const Jet> x) {
  JVec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i];
  return out;
}

JVec sub(std::span<const Jet> a, std::span<const Jet> b) {
  JVec out(a.begin(), a.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

JVec add(std::span<const Jet> a, std::span<const Jet> b) {
  JVec out(a.begin(), a.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

double max_abs(std::span<const Jet> a) {
  double m = 0.0;
  for (const auto& x : a) {
    const double v = std::fabs(x.value());
    if (v > m || std::isnan(v)) m = v;
  }
  return m;
}

Mat to_mat(const std::vector<Vec>& rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size());
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
  return m;
}

EVec to_evec(std::span<const double> v) {
  EVec e(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) e(static_cast<Eigen::Index>(i)) = v[i];
  return e;
}

Vec to_vec(const EVec& v) { return Vec(v.data(), v.data() + v.size()); }

double smallest_singular_value(const Mat& m) {
  if (m.rows() == 0 || m.cols() == 0) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues().minCoeff();
}

Mat complement_basis(const EVec& w) {
  const Eigen::Index n = w.size();
  Eigen::HouseholderQR<Mat> qr(Mat(w.normalized()));
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  return q.rightCols(n - 1);
}

}  // namespace lg
