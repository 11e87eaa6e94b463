#pragma once
// Dense linear algebra on jets (for derivatives of solved coefficients) and a
// few Eigen conveniences on plain doubles.

#include <Eigen/Dense>
#include <vector>

#include "lg/jet.hpp"

namespace lg {

using Mat = Eigen::MatrixXd;
using EVec = Eigen::VectorXd;

/// Square solve A x = b with partial pivoting on values. Rows of A are given.
JVec solve_square(std::vector<JVec> A, JVec b);

/// Least-squares coefficients c minimizing |sum_j c_j cols[j] - b| through the
/// normal equations; cols must be linearly independent at the value level.
JVec solve_lsq(const std::vector<JVec>& cols, const JVec& b);

/// Residual |sum_j c_j cols[j] - b|_inf at the value level.
double lsq_residual(const std::vector<JVec>& cols, const JVec& c, const JVec& b);

Jet dot(std::span<const Jet> a, std::span<const Jet> b);
JVec axpy(const Jet& a, std::span<const Jet> x, std::span<const Jet> y);  // a*x + y
JVec scaled(const Jet& a, std::span<const Jet> x);
JVec sub(std::span<const Jet> a, std::span<const Jet> b);
JVec add(std::span<const Jet> a, std::span<const Jet> b);
double max_abs(std::span<const Jet> a);

Mat to_mat(const std::vector<Vec>& rows);
EVec to_evec(std::span<const double> v);
Vec to_vec(const EVec& v);
double smallest_singular_value(const Mat& m);
/// Orthonormal basis (columns) of the orthogonal complement of unit vector w.
Mat complement_basis(const EVec& w);

}  // namespace lg
