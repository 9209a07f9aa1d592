#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "smm/model_io.hpp"

using namespace smm;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path(std::string("/tmp/smm_io_") + name) {}
  ~TempFile() { std::remove(path.c_str()); }
  void write(const std::string& text) {
    std::ofstream os(path);
    os << text;
  }
};

}  // namespace

TEST(Io, RoundTripIsExact) {
  ModelSpec m = make_model(two_phase_map(0.3), two_phase_ph(), 3, "study");
  TempFile f("roundtrip.json");
  save_model(m, f.path);
  ModelSpec r = load_model(f.path);
  EXPECT_EQ(r.name, "study");
  EXPECT_EQ(r.d, 3);
  EXPECT_TRUE(r.map.C == m.map.C);
  EXPECT_TRUE(r.map.D == m.map.D);
  EXPECT_TRUE(r.ph.alpha == m.ph.alpha);
  EXPECT_TRUE(r.ph.T == m.ph.T);
  EXPECT_EQ(model_hash(r), model_hash(m));
}

TEST(Io, HashSeparatesModels) {
  ModelSpec a = make_model(poisson_map(0.5), exponential_ph(1.0), 2);
  ModelSpec b = make_model(poisson_map(0.5), exponential_ph(1.0), 3);
  ModelSpec c = make_model(poisson_map(0.5000001), exponential_ph(1.0), 2);
  EXPECT_NE(model_hash(a), model_hash(b));
  EXPECT_NE(model_hash(a), model_hash(c));
}

TEST(Io, LoadsHandWrittenStudyModel) {
  TempFile f("study.json");
  f.write(R"({
    "name": "two-phase service",
    "d": 2,
    "map": {"C": [[-1.0]], "D": [[1.0]]},
    "ph": {"alpha": [0.5, 0.5], "T": [[-5.0, 3.0], [2.0, -7.0]]}
  })");
  ModelSpec m = load_model(f.path);
  EXPECT_EQ(m.d, 2);
  EXPECT_NEAR(1.0 / ph_mean(m.ph), 3.4118, 1e-4);
  EXPECT_NEAR(map_rate(m.map), 1.0, 1e-15);
}

TEST(Io, RejectsMalformedInput) {
  TempFile f("bad.json");
  f.write("{ not json");
  EXPECT_THROW(load_model(f.path), ValidationError);
  EXPECT_THROW(load_model("/tmp/smm_io_does_not_exist.json"), ValidationError);

  f.write(R"({"d": 2, "map": {"C": [[-1.0]], "D": [[1.0]]}})");
  EXPECT_THROW(load_model(f.path), ValidationError);  // ph missing

  f.write(R"({"d": 2, "map": {"C": [[-1.0]], "D": [[1.0, 0.0]]},
              "ph": {"alpha": [1.0], "T": [[-1.0]]}})");
  EXPECT_THROW(load_model(f.path), ValidationError);  // D not square with C

  f.write(R"({"d": 0, "map": {"C": [[-1.0]], "D": [[1.0]]},
              "ph": {"alpha": [1.0], "T": [[-1.0]]}})");
  EXPECT_THROW(load_model(f.path), ValidationError);  // d < 1

  f.write(R"({"d": 2, "map": {"C": [[-0.5]], "D": [[1.0]]},
              "ph": {"alpha": [1.0], "T": [[-1.0]]}})");
  EXPECT_THROW(load_model(f.path), ValidationError);  // row sum 0.5
}

TEST(Io, RejectsNegativeArrivalEntry) {
  TempFile f("neg.json");
  f.write(R"({"d": 1, "map": {"C": [[-1.0, 2.0], [1.0, -2.0]],
                              "D": [[0.5, -1.5], [0.0, 1.0]]},
              "ph": {"alpha": [1.0], "T": [[-1.0]]}})");
  EXPECT_THROW(load_model(f.path), ValidationError);
}

TEST(Io, MatrixErrorsNameTheSpot) {
  TempFile f("ragged.json");
  f.write(R"({"d": 1, "map": {"C": [[-1.0, 1.0], [1.0]], "D": [[0,0],[0,0]]},
              "ph": {"alpha": [1.0], "T": [[-1.0]]}})");
  try {
    load_model(f.path);
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row"), std::string::npos);
  }
}

TEST(Io, BuildersAreValid) {
  EXPECT_NO_THROW(validate_model(make_model(poisson_map(0.5),
                                            exponential_ph(1.0), 1)));
  EXPECT_NO_THROW(validate_model(make_model(poisson_map(1.0),
                                            erlang_ph(4, 8.0), 10)));
  EXPECT_NO_THROW(validate_model(make_model(two_phase_map(0.9),
                                            two_phase_family(1), 2)));
  EXPECT_THROW(two_phase_family(4), ValidationError);
  EXPECT_THROW(erlang_ph(0, 1.0), ValidationError);
  EXPECT_THROW(exponential_ph(0.0), ValidationError);
  EXPECT_THROW(poisson_map(-1.0), ValidationError);
}
