#pragma once

#include <Eigen/Dense>

#include "smm/errors.hpp"

namespace smm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

inline Matrix kron_product(const Matrix& A, const Matrix& B) {
  if (A.size() == 0 || B.size() == 0)
    throw StructuralError("kron_product: empty operand");
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

// A ⊕ B = A⊗I + I⊗B; generator of two independent Markovian components.
inline Matrix kron_sum(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || B.rows() != B.cols())
    throw StructuralError("kron_sum: operands must be square");
  return kron_product(A, Matrix::Identity(B.rows(), B.cols())) +
         kron_product(Matrix::Identity(A.rows(), A.cols()), B);
}

// Max absolute row sum.
inline double inf_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  return A.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double inf_norm(const RowVec& v) {
  if (v.size() == 0) return 0.0;
  return v.cwiseAbs().maxCoeff();
}

// Stationary row vector of an irreducible conservative generator Q:
// x Q = 0, x e = 1. Solved densely by replacing one balance equation with
// the normalization; post-checked to residual ≤ tol.
inline RowVec stationary_vector(const Matrix& Q, double tol = 1e-12) {
  const Eigen::Index n = Q.rows();
  if (n == 0 || Q.cols() != n)
    throw StructuralError("stationary_vector: Q must be square and nonempty");
  if (n == 1) {
    RowVec x(1);
    x(0) = 1.0;
    return x;
  }
  Matrix A = Q.transpose();
  A.row(n - 1).setOnes();
  Vector b = Vector::Zero(n);
  b(n - 1) = 1.0;
  Vector x = A.fullPivLu().solve(b);
  RowVec pi = x.transpose();
  const double resid = inf_norm(RowVec(pi * Q));
  if (resid > tol)
    throw NumericalError("stationary_vector: residual " + std::to_string(resid) +
                         " exceeds tolerance");
  return pi;
}

}  // namespace smm
