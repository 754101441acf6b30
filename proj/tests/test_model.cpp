#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arsid/selfcheck.hpp"
#include "arsid/types.hpp"

using namespace arsid;

namespace {

ARModel identity_model() {
  ARModel m;
  m.p = 1;
  m.d = 2;
  m.blocks = {Mat::Identity(2, 2)};
  m.sigma = 1.0;
  return m;
}

}  // namespace

TEST_CASE("validate_model accepts the identity case") {
  CHECK_NOTHROW(validate_model(identity_model()));
}

TEST_CASE("validate_model rejects shape violations") {
  ARModel m;
  m.p = 2;
  m.d = 2;
  m.blocks = {Mat::Identity(2, 2), Mat::Zero(3, 2)};
  CHECK_THROWS_AS(validate_model(m), std::invalid_argument);

  m.blocks = {Mat::Identity(2, 2)};  // wrong count
  CHECK_THROWS_AS(validate_model(m), std::invalid_argument);
}

TEST_CASE("validate_model rejects negative sigma and non-finite entries") {
  ARModel m = identity_model();
  m.sigma = -1.0;
  CHECK_THROWS_AS(validate_model(m), std::invalid_argument);

  m = identity_model();
  m.blocks[0](0, 1) = std::nan("");
  CHECK_THROWS_AS(validate_model(m), std::invalid_argument);
}

TEST_CASE("truncate_truth with p_prime = p is the identity") {
  const ARModel m = random_model(1, 0, 3, 3, 0.8);
  const ARModel t = truncate_truth(m, 3);
  for (int k = 0; k < 3; ++k) {
    CHECK((t.blocks[k] - m.blocks[k]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("truncate_truth zeroes the tail blocks") {
  ARModel m;
  m.p = 2;
  m.d = 2;
  m.blocks = {Mat::Identity(2, 2), Mat::Constant(2, 2, 3.0)};
  const ARModel t = truncate_truth(m, 1);
  CHECK(t.p == 2);
  CHECK((t.blocks[0] - m.blocks[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.blocks[1].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("truncate_truth Frobenius distance equals the tail norm") {
  const ARModel m = random_model(2, 1, 3, 4, 1.0);
  const int p_prime = 2;
  const ARModel t = truncate_truth(m, p_prime);
  double tail = 0.0;
  for (int k = p_prime; k < m.p; ++k) tail += m.blocks[k].squaredNorm();
  double dist = 0.0;
  for (int k = 0; k < m.p; ++k) dist += (m.blocks[k] - t.blocks[k]).squaredNorm();
  CHECK(dist == doctest::Approx(tail).epsilon(1e-12));
}

TEST_CASE("truncate_truth is idempotent and validates its range") {
  const ARModel m = random_model(3, 2, 2, 3, 0.7);
  const ARModel once = truncate_truth(m, 2);
  const ARModel twice = truncate_truth(once, 2);
  for (int k = 0; k < m.p; ++k) {
    CHECK((once.blocks[k] - twice.blocks[k]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(truncate_truth(m, 0), std::invalid_argument);
  CHECK_THROWS_AS(truncate_truth(m, 4), std::invalid_argument);
}

TEST_CASE("concat and split round-trip blocks") {
  const ARModel m = random_model(4, 0, 3, 2, 0.9);
  const Mat c = m.concat();
  CHECK(c.rows() == 3);
  CHECK(c.cols() == 6);
  const std::vector<Mat> back = split_blocks(c, 3);
  REQUIRE(back.size() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK((back[k] - m.blocks[k]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("estimator config invariants") {
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::constrained_pgd;
  cfg.p_student = 0;
  CHECK_THROWS_AS(cfg.validate(3), std::invalid_argument);
  cfg.p_student = 2;
  cfg.D = 0.5;
  CHECK_THROWS_AS(cfg.validate(3), std::invalid_argument);
  cfg.D = 2.0;
  CHECK_NOTHROW(cfg.validate(3));

  cfg.kind = EstimatorKind::iht_low_rank;
  cfg.r = 4;
  CHECK_THROWS_AS(cfg.validate(3), std::invalid_argument);
  cfg.r = 2;
  CHECK_NOTHROW(cfg.validate(3));

  cfg.step_size = -0.1;
  CHECK_THROWS_AS(cfg.validate(3), std::invalid_argument);
  cfg.step_size = 0.1;
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(3), std::invalid_argument);
}

TEST_CASE("noise spec reports a family-derived sub-gaussian constant") {
  NoiseSpec g;
  CHECK(g.subgauss_c() == 1.0);
  NoiseSpec u;
  u.family = NoiseFamily::uniform;
  CHECK(u.subgauss_c() >= 1.0);
  CHECK(u.subgauss_c() == doctest::Approx(std::sqrt(3.0)));
}
