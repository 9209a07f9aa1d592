#include <gtest/gtest.h>

#include "smm/map_ph.hpp"
#include "smm/model_io.hpp"

using namespace smm;

TEST(Map, StationaryOfStudyInput) {
  for (double lambda : {0.3, 0.5, 1.0}) {
    MapDescriptor m = two_phase_map(lambda);
    RowVec w = stationary_vector(m.C + m.D);
    EXPECT_NEAR(w(0), 7.0 / 12.0, 1e-13);
    EXPECT_NEAR(w(1), 5.0 / 12.0, 1e-13);
    EXPECT_NEAR(map_rate(m), lambda, 1e-13);
  }
}

TEST(Map, PoissonRate) {
  MapDescriptor m = poisson_map(0.7);
  EXPECT_EQ(m.order(), 1);
  EXPECT_NEAR(map_rate(m), 0.7, 1e-15);
}

TEST(Map, ValidationRejectsBadRows) {
  Matrix C(2, 2), D(2, 2);
  C << -3, 1, 0, -2;
  D << 1, 1, 1, 1;
  MapDescriptor ok{C, D};
  EXPECT_NO_THROW(validate_map(ok));
  // Broken row sum.
  MapDescriptor bad = ok;
  bad.D(1, 1) = 0.5;
  EXPECT_THROW(validate_map(bad), ValidationError);
  // Negative arrival block entry (row sums kept intact).
  MapDescriptor neg = ok;
  neg.D(0, 1) = -1.0;
  neg.C(0, 0) = -1.0;
  EXPECT_THROW(validate_map(neg), ValidationError);
  // Zero arrival block: no arrivals at all.
  MapDescriptor zero = ok;
  zero.D.setZero();
  zero.C << -1, 1, 1, -1;
  EXPECT_THROW(validate_map(zero), ValidationError);
}

TEST(Map, RowSumErrorNamesTheRow) {
  Matrix C(2, 2), D(2, 2);
  C << -3, 1, 0, -2;
  D << 1, 1, 1, 0.5;
  try {
    validate_map({C, D});
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(Map, ScaledKeepsGeneratorAndScalesRate) {
  MapDescriptor m = two_phase_map(0.5);
  const long N = 37;
  MapDescriptor s = scaled_map(m, N);
  Vector rs = (s.C + s.D).rowwise().sum();
  for (Eigen::Index i = 0; i < rs.size(); ++i) EXPECT_NEAR(rs(i), 0.0, 1e-10);
  // The arrival block is diagonal here, so scaling preserves omega and the
  // stationary arrival rate is exactly N lambda.
  RowVec w = stationary_vector(s.C + s.D);
  EXPECT_NEAR(map_rate(s), double(N) * 0.5, 1e-9);
  EXPECT_NEAR(w(0), 7.0 / 12.0, 1e-12);
}

TEST(Ph, MeansOfBuilders) {
  EXPECT_NEAR(ph_mean(exponential_ph(2.0)), 0.5, 1e-15);
  EXPECT_NEAR(ph_mean(erlang_ph(3, 6.0)), 0.5, 1e-13);
  EXPECT_NEAR(ph_mean(two_phase_ph()), 17.0 / 58.0, 1e-13);
  EXPECT_NEAR(1.0 / ph_mean(two_phase_ph()), 3.4118, 1e-4);
  EXPECT_NEAR(ph_mean(two_phase_family(2)), 4.0 / 11.0, 1e-13);
  EXPECT_NEAR(ph_mean(two_phase_family(3)), 17.0 / 40.0, 1e-13);
}

TEST(Ph, ResidualDistribution) {
  // theta solves theta (T + T0 alpha) = 0; for the study service law the
  // result is (9/17, 8/17) with residual mean 146/493.
  ResidualPh r = ph_residual(two_phase_ph());
  EXPECT_NEAR(r.theta(0), 9.0 / 17.0, 1e-12);
  EXPECT_NEAR(r.theta(1), 8.0 / 17.0, 1e-12);
  EXPECT_NEAR(r.mean, 146.0 / 493.0, 1e-12);
  // Any single-phase law has residual mean equal to its mean.
  ResidualPh e = ph_residual(exponential_ph(3.0));
  EXPECT_DOUBLE_EQ(e.mean, ph_mean(exponential_ph(3.0)));
}

TEST(Ph, ValidationRejects) {
  RowVec alpha(2);
  alpha << 0.6, 0.5;  // sums to 1.1
  Matrix T(2, 2);
  T << -3, 1, 0, -2;
  EXPECT_THROW(validate_ph({alpha, T}), ValidationError);
  alpha << 0.5, 0.5;
  Matrix bad = T;
  bad(0, 1) = 4.0;  // positive row sum
  EXPECT_THROW(validate_ph({alpha, bad}), ValidationError);
  Matrix noexit(2, 2);
  noexit << -1, 1, 2, -2;  // no absorption anywhere
  EXPECT_THROW(validate_ph({alpha, noexit}), ValidationError);
  EXPECT_NO_THROW(validate_ph({alpha, T}));
}

TEST(Model, TrafficIntensity) {
  ModelSpec m = make_model(poisson_map(1.0), two_phase_ph(), 2);
  Intensity in = traffic_intensity(m);
  EXPECT_NEAR(in.rho, 17.0 / 58.0, 1e-13);
  EXPECT_TRUE(in.stable);
  ModelSpec hot = make_model(poisson_map(4.0), two_phase_ph(), 2);
  EXPECT_FALSE(traffic_intensity(hot).stable);
}

TEST(Model, ExitVector) {
  PhDistribution ph = two_phase_ph();
  Vector t0 = ph.exit();
  EXPECT_NEAR(t0(0), 2.0, 1e-15);  // -(-5) - 3
  EXPECT_NEAR(t0(1), 5.0, 1e-15);  // -(-7) - 2
}
