#include <gtest/gtest.h>

#include "smm/linalg.hpp"

using namespace smm;

TEST(Kron, ProductShapeAndValues) {
  Matrix A(2, 2), B(2, 2);
  A << 1, 2, 3, 4;
  B << 0, 5, 6, 7;
  Matrix K = kron_product(A, B);
  ASSERT_EQ(K.rows(), 4);
  ASSERT_EQ(K.cols(), 4);
  EXPECT_DOUBLE_EQ(K(0, 1), 5.0);   // A(0,0) * B(0,1)
  EXPECT_DOUBLE_EQ(K(3, 2), 4.0 * 6.0);
  EXPECT_DOUBLE_EQ(K(1, 3), 2.0 * 7.0);  // A(0,1) * B(1,1)
}

TEST(Kron, MixedProductProperty) {
  Matrix A = Matrix::Random(3, 3), B = Matrix::Random(2, 2);
  Matrix C = Matrix::Random(3, 3), D = Matrix::Random(2, 2);
  Matrix lhs = kron_product(A, B) * kron_product(C, D);
  Matrix rhs = kron_product(Matrix(A * C), Matrix(B * D));
  EXPECT_LT(inf_norm(Matrix(lhs - rhs)), 1e-12);
}

TEST(Kron, SumIsGeneratorForGenerators) {
  Matrix A(2, 2), B(2, 2);
  A << -1, 1, 2, -2;
  B << -3, 3, 0.5, -0.5;
  Matrix S = kron_sum(A, B);
  ASSERT_EQ(S.rows(), 4);
  Vector rs = S.rowwise().sum();
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(rs(i), 0.0, 1e-14);
  Matrix expl = kron_product(A, Matrix::Identity(2, 2)) +
                kron_product(Matrix::Identity(2, 2), B);
  EXPECT_LT(inf_norm(Matrix(S - expl)), 1e-15);
}

TEST(InfNorm, MatrixMaxAbsRowSum) {
  Matrix A(2, 3);
  A << 1, -2, 3, -4, 5, -6;
  EXPECT_DOUBLE_EQ(inf_norm(A), 15.0);
  RowVec v(3);
  v << 1.5, -2.5, 0.25;
  EXPECT_DOUBLE_EQ(inf_norm(v), 2.5);
}

TEST(Stationary, TwoStateChain) {
  Matrix Q(2, 2);
  Q << -1, 1, 2, -2;
  RowVec w = stationary_vector(Q);
  EXPECT_NEAR(w(0), 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(w(1), 1.0 / 3.0, 1e-14);
  EXPECT_LT(inf_norm(RowVec(w * Q)), 1e-12);
}

TEST(Stationary, SymmetricAndTrivial) {
  Matrix Q(2, 2);
  Q << -4, 4, 4, -4;
  RowVec w = stationary_vector(Q);
  EXPECT_NEAR(w(0), 0.5, 1e-14);
  Matrix one = Matrix::Zero(1, 1);
  RowVec w1 = stationary_vector(one);
  EXPECT_DOUBLE_EQ(w1(0), 1.0);
}

TEST(Stationary, ThreeStateCycleResidual) {
  Matrix Q(3, 3);
  Q << -2, 1.5, 0.5, 0.25, -1, 0.75, 1, 1, -2;
  RowVec w = stationary_vector(Q);
  EXPECT_NEAR(w.sum(), 1.0, 1e-14);
  EXPECT_GT(w.minCoeff(), 0.0);
  EXPECT_LT(inf_norm(RowVec(w * Q)), 1e-12);
}
