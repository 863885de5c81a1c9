#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <vector>

#include "advprec/matrix.hpp"
#include "advprec/synth.hpp"

using namespace advprec;

namespace {

SymMatrix load_golden(const std::string& name) {
  const std::string path = std::string(GOLDEN_DIR) + "/models/" + name + "_d10.txt";
  std::ifstream in(path);
  REQUIRE(in.good());
  return parse_matrix(in);
}

}  // namespace

TEST_CASE("model matrices match the golden coefficient tables") {
  for (const char* name : {"ar2", "ar3", "ar4", "star", "circle"}) {
    const GroundTruth gt = make_model(*parse_model(name), 10);
    const SymMatrix golden = load_golden(name);
    INFO(name);
    CHECK_FALSE(gt.pd_adjusted);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) CHECK(gt.precision(i, j) == golden(i, j));
  }
}

TEST_CASE("model parsing is a closed set") {
  CHECK(parse_model("ar2").has_value());
  CHECK(parse_model("circle").has_value());
  CHECK_FALSE(parse_model("ar5").has_value());
  CHECK_FALSE(parse_model("").has_value());
}

TEST_CASE("ar2 at d = 5 is PD without adjustment") {
  const GroundTruth gt = make_model(ModelKind::AR2, 5);
  CHECK_FALSE(gt.pd_adjusted);
  const EigenDecomposition e = symeig(gt.precision);
  CHECK(e.values.front() > 0.2);  // Toeplitz symbol floor 0.25, minus edge effects
  CHECK(gt.support.size() == 4 + 3);
}

TEST_CASE("circle at d = 4 hits the documented corners") {
  // d >= 5 is the supported range; check corners at d = 5 instead
  const GroundTruth gt = make_model(ModelKind::Circle, 5);
  CHECK(gt.precision(0, 4) == 0.4);
  CHECK(gt.precision(0, 1) == 0.5);
  CHECK(gt.precision(2, 2) == 1.0);
  CHECK(gt.precision(0, 2) == 0.0);
}

TEST_CASE("star at d = 30 requires the documented adjustment") {
  const GroundTruth gt = make_model(ModelKind::Star, 30);
  CHECK(gt.pd_adjusted);
  CHECK(gt.precision(0, 0) == 1.2);
  for (int i = 1; i < 30; ++i) CHECK(gt.precision(0, i) == 0.2);
  const EigenDecomposition e = symeig(gt.precision);
  CHECK(e.values.front() > 0.0);
  CHECK(e.values.front() == Catch::Approx(0.018334617).margin(1e-6));
  CHECK(gt.support.size() == 29);
}

TEST_CASE("heteroskedastic scaling") {
  {
    const GroundTruth gt = make_model(ModelKind::AR2, 6);
    const GroundTruth same = heteroskedastic_scale(gt, std::vector<double>(6, 1.0));
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        CHECK(same.precision(i, j) == gt.precision(i, j));
        CHECK(same.covariance(i, j) == gt.covariance(i, j));
      }
  }
  {
    // diag covariance scaling arithmetic at d = 5 (spec d = 2 case embedded)
    GroundTruth gt = make_model(ModelKind::Star, 5);
    SymMatrix eye = SymMatrix::identity(5);
    gt.precision = eye;
    gt.covariance = SymPDMatrix(eye);
    gt.support.clear();
    const GroundTruth scaled = heteroskedastic_scale(gt, {10.0, 1.0, 1.0, 1.0, 1.0});
    CHECK(scaled.covariance(0, 0) == Catch::Approx(100.0));
    CHECK(scaled.precision(0, 0) == Catch::Approx(0.01));
    CHECK(scaled.covariance(1, 1) == Catch::Approx(1.0));
  }
  {
    const GroundTruth gt = make_model(ModelKind::AR2, 30);
    const GroundTruth scaled = heteroskedastic_scale(gt, default_scales(30));
    CHECK(scaled.support == gt.support);
    // sign pattern preserved
    for (auto [i, j] : gt.support)
      CHECK((scaled.precision(i, j) > 0) == (gt.precision(i, j) > 0));
  }
  GroundTruth gt = make_model(ModelKind::AR2, 5);
  CHECK_THROWS_AS(heteroskedastic_scale(gt, {1.0, -1.0, 1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("gaussian sampling reproduces and matches moments") {
  SymMatrix cov(2);
  cov.set(0, 0, 1.0);
  cov.set(0, 1, 0.5);
  cov.set(1, 1, 1.0);
  const SymPDMatrix c(cov);

  const Dataset a = sample_gaussian(c, 500, 42);
  const Dataset b = sample_gaussian(c, 500, 42);
  REQUIRE(a.x.size() == b.x.size());
  for (std::size_t i = 0; i < a.x.size(); ++i) CHECK(a.x[i] == b.x[i]);  // bit-for-bit

  const Dataset big = sample_gaussian(c, 1000000, 7);
  const SymMatrix m = second_moment(big);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(m(i, j) == Catch::Approx(cov(i, j)).margin(0.01));
}

TEST_CASE("scalar variance sampling") {
  const SymPDMatrix c(SymMatrix::diag({4.0}));
  const Dataset x = sample_gaussian(c, 100000, 99);
  double m2 = 0.0;
  for (int i = 0; i < x.n; ++i) m2 += x(i, 0) * x(i, 0);
  m2 /= x.n;
  CHECK(m2 == Catch::Approx(4.0).margin(0.1));
}

TEST_CASE("marginal third moments vanish") {
  const GroundTruth gt = make_model(ModelKind::AR3, 6);
  const Dataset x = sample_gaussian(gt.covariance, 100000, 4711);
  for (int j = 0; j < 6; ++j) {
    double m2 = 0.0, m3 = 0.0;
    for (int i = 0; i < x.n; ++i) {
      m2 += x(i, j) * x(i, j);
      m3 += x(i, j) * x(i, j) * x(i, j);
    }
    m2 /= x.n;
    m3 /= x.n;
    CHECK(m3 / std::pow(m2, 1.5) == Catch::Approx(0.0).margin(0.05));
  }
}
