#include <gtest/gtest.h>

#include "dualscope/io.hpp"
#include "dualscope/types.hpp"
#include "test_util.hpp"

namespace ds = dualscope;

TEST(ValidateModel, AcceptsTwoStateChain) {
  const ds::Model md = testutil::m1();
  EXPECT_EQ(md.d, 2);
  EXPECT_EQ(md.m, 1);
  EXPECT_DOUBLE_EQ(md.A(0, 1), 1.0);
}

TEST(ValidateModel, RowSumViolationReportsWorstRow) {
  ds::Matrix A(2, 2), H(2, 1);
  A << -1, 0.5, 1, -1;
  H << 1, -1;
  try {
    ds::validate_model(A, H);
    FAIL() << "expected RowSumViolation";
  } catch (const ds::RowSumViolation& e) {
    EXPECT_EQ(e.row, 0);
    EXPECT_NEAR(e.residual, -0.5, 1e-15);
  }
}

TEST(ValidateModel, ZeroGeneratorIsLegal) {
  ds::Matrix A = ds::Matrix::Zero(3, 3), H(3, 1);
  H << 1, 1, 2;
  const ds::Model md = ds::validate_model(A, H);
  EXPECT_EQ(md.d, 3);
}

TEST(ValidateModel, RejectsNegativeOffDiagonal) {
  ds::Matrix A(2, 2), H(2, 1);
  A << 1, -1, 1, -1;
  H << 1, 2;
  EXPECT_THROW(ds::validate_model(A, H), ds::NegativeOffDiagonal);
}

TEST(ValidateModel, RejectsNonSquareGenerator) {
  ds::Matrix A(2, 3), H(2, 1);
  A.setZero();
  H << 1, 2;
  EXPECT_THROW(ds::validate_model(A, H), ds::NonSquareGenerator);
}

TEST(ValidateModel, RejectsMismatchedObservationRows) {
  ds::Matrix A = ds::Matrix::Zero(2, 2);
  ds::Matrix H(3, 1);
  H << 1, 2, 3;
  EXPECT_THROW(ds::validate_model(A, H), ds::DimensionMismatch);
}

TEST(ValidateModel, RejectsWrongLabelCount) {
  ds::Matrix A = ds::Matrix::Zero(2, 2);
  ds::Matrix H(2, 1);
  H << 1, 2;
  EXPECT_THROW(ds::validate_model(A, H, {"only-one"}), ds::DimensionMismatch);
}

TEST(ValidateModel, RejectsNonFiniteEntries) {
  ds::Matrix A = ds::Matrix::Zero(2, 2);
  ds::Matrix H(2, 1);
  H << std::nan(""), 2;
  EXPECT_THROW(ds::validate_model(A, H), ds::NotFinite);
}

TEST(Measures, ProbabilityValidation) {
  ds::Vector good(2), unnormalized(2), negative(2);
  good << 0.5, 0.5;
  unnormalized << 0.5, 0.6;
  negative << 1.5, -0.5;
  EXPECT_NO_THROW(ds::ProbabilityMeasure{good});
  EXPECT_THROW(ds::ProbabilityMeasure{unnormalized}, ds::ConfigError);
  EXPECT_THROW(ds::ProbabilityMeasure{negative}, ds::ConfigError);
}

TEST(ModelJson, LoadsCanonicalFile) {
  const ds::Model md = ds::load_model(testutil::models_dir() + "/m1.json");
  EXPECT_EQ(md.d, 2);
  EXPECT_EQ(md.labels.size(), 2u);
  EXPECT_EQ(md.labels[0], "s1");
}

TEST(ModelJson, RejectsUnknownKeys) {
  const ds::json j = {{"d", 2},
                      {"m", 1},
                      {"A", {{-1, 1}, {1, -1}}},
                      {"H", {{1}, {-1}}},
                      {"extra", 1}};
  EXPECT_THROW(ds::model_from_json(j), ds::ConfigError);
}

TEST(ModelJson, RejectsMissingKeysAndBadShapes) {
  ds::json j = {{"d", 2}, {"m", 1}, {"A", {{-1, 1}, {1, -1}}}};
  EXPECT_THROW(ds::model_from_json(j), ds::ConfigError);
  j["H"] = {{1}, {-1}, {3}};
  EXPECT_THROW(ds::model_from_json(j), ds::DimensionMismatch);
}

TEST(ModelJson, RoundTrips) {
  const ds::Model md = testutil::m2();
  const ds::Model back = ds::model_from_json(ds::model_to_json(md));
  EXPECT_EQ(back.d, md.d);
  EXPECT_NEAR((back.A - md.A).cwiseAbs().maxCoeff(), 0.0, 0.0);
  EXPECT_NEAR((back.H - md.H).cwiseAbs().maxCoeff(), 0.0, 0.0);
}

TEST(TimeGrid, SnapsHorizonToStepMultiple) {
  const ds::TimeGrid g = ds::TimeGrid::make(1.00049, 1e-3);
  EXPECT_EQ(g.n_steps, 1000);
  EXPECT_DOUBLE_EQ(g.horizon(), 1.0);
  EXPECT_DOUBLE_EQ(g.requested_horizon, 1.00049);
  EXPECT_THROW(ds::TimeGrid::make(1.0, 0.0), ds::ConfigError);
  EXPECT_THROW(ds::TimeGrid::make(-1.0, 0.1), ds::ConfigError);
}
