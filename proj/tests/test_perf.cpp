#include <gtest/gtest.h>

#include "smm/model_io.hpp"
#include "smm/perf.hpp"

using namespace smm;

TEST(QueueLength, ClosedValues) {
  EXPECT_DOUBLE_EQ(mean_queue_length(0.0, 3), 0.0);
  EXPECT_NEAR(mean_queue_length(0.5, 1), 1.0, 1e-15);
  EXPECT_NEAR(mean_queue_length(0.9, 1), 9.0, 1e-12);
  // Frozen series value: sum of 0.5^{2^k - 1}.
  EXPECT_NEAR(mean_queue_length(0.5, 2), 0.6328430180437863, 1e-15);
  EXPECT_THROW(mean_queue_length(1.0, 2), ValidationError);
  EXPECT_THROW(mean_queue_length(-0.1, 2), ValidationError);
  EXPECT_THROW(mean_queue_length(0.5, 0), ValidationError);
}

TEST(QueueLength, MoreChoicesNeverHurt) {
  for (double rho : {0.1, 0.5, 0.9, 0.99}) {
    double prev = mean_queue_length(rho, 1);
    for (int d = 2; d <= 10; ++d) {
      const double cur = mean_queue_length(rho, d);
      EXPECT_LT(cur, prev) << "rho=" << rho << " d=" << d;
      prev = cur;
    }
  }
}

TEST(Sojourn, ExponentialLittleLaw) {
  const PhDistribution ex = exponential_ph(1.0);
  EXPECT_NEAR(mean_sojourn(ex, 0.5, 1), 2.0, 1e-15);
  for (double lambda : {0.2, 0.5, 0.8}) {
    const double et = mean_sojourn(ex, lambda, 1);
    const double eq = mean_queue_length(lambda, 1);
    EXPECT_NEAR(et, eq / lambda, 1e-12) << "lambda=" << lambda;
  }
  EXPECT_DOUBLE_EQ(mean_sojourn(ex, 0.0, 3), 1.0);
  EXPECT_THROW(mean_sojourn(ex, 1.0, 1), ValidationError);
}

TEST(Sojourn, ResidualTermForNonExponentialService) {
  // At d = 1 the sojourn formula exceeds EQ/lambda by rho (EXR - EX)
  // whenever the service law is not exponential.
  const PhDistribution ph = two_phase_ph();
  const double lambda = 1.0;
  const double rho = lambda * ph_mean(ph);
  const double gap = mean_sojourn(ph, lambda, 1) -
                     mean_queue_length(rho, 1) / lambda;
  EXPECT_NEAR(gap, rho * (ph_residual(ph).mean - ph_mean(ph)), 1e-13);
}

TEST(Report, FieldsAndTruncation) {
  PerfReport r = perf_report(two_phase_ph(), 1.0, 2);
  EXPECT_NEAR(r.rho, 17.0 / 58.0, 1e-13);
  EXPECT_NEAR(r.EX, 17.0 / 58.0, 1e-13);
  EXPECT_NEAR(r.EXR, 146.0 / 493.0, 1e-12);
  EXPECT_GT(r.EQ, r.rho);            // at least the busy mass
  EXPECT_GT(r.ET, r.EX);             // waiting adds to service
  EXPECT_LT(r.trunc_bound, 1e-13);
  EXPECT_GE(r.trunc_level, 3);
}

TEST(Tables, ShapesAndGuards) {
  EXPECT_EQ(example_table(1).rows.size(), 76u);
  EXPECT_EQ(example_table(2).rows.size(), 84u);
  EXPECT_EQ(example_table(3).rows.size(), 33u);
  EXPECT_EQ(example_table(4).rows.size(), 76u);
  EXPECT_EQ(example_table(1).columns.size(),
            example_table(1).rows[0].size());
  EXPECT_THROW(example_table(0), ValidationError);
  EXPECT_THROW(example_table(5), ValidationError);
}

TEST(Tables, ServiceVariantOrdering) {
  // At lambda = 1, d = 2 the three service variants order by their load.
  PerfTable t = example_table(3);
  double et[4] = {0, 0, 0, 0};
  for (const auto& row : t.rows)
    if (std::abs(row[1] - 1.0) < 1e-12) et[int(row[0])] = row[5];
  EXPECT_LT(et[1], et[2]);
  EXPECT_LT(et[2], et[3]);
}

TEST(Tables, AllGridPointsStable) {
  // Every study grid stays below saturation; the stable flag and the
  // NaN-free measures must reflect that.
  for (int which : {1, 2, 3, 4}) {
    PerfTable t = example_table(which);
    const size_t stable_col = t.columns.size() - 1;
    for (const auto& row : t.rows) {
      EXPECT_EQ(row[stable_col], 1.0) << "table " << which;
      for (double v : row) EXPECT_FALSE(std::isnan(v)) << "table " << which;
    }
  }
}
