#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <sketchreg/detail/random.hpp>
#include <sketchreg/measures.hpp>

using namespace sketchreg;

namespace {

// Standard MP Stieltjes transform m(z) = int 1/(x - z) dF, written out from
// the quadratic y z m^2 + (z - 1 + y) m + 1 = 0; the root positive on z < 0.
double mp_stieltjes_oracle(double y, double z) {
  const double b = z - 1.0 - y;
  return (1.0 - y - z - std::sqrt(b * b - 4.0 * y)) / (2.0 * y * z);
}

}  // namespace

TEST(Discrete, PointMass) {
  const auto m = make_discrete({{1.0, 1.0}});
  ASSERT_TRUE(m.is_point_mass());
  EXPECT_DOUBLE_EQ(m.atoms()[0].location, 1.0);
  EXPECT_DOUBLE_EQ(m.atoms()[0].weight, 1.0);
}

TEST(Discrete, TwoLevelSpectrum) {
  const auto m = make_discrete({{2.0, 0.5}, {1.0, 0.5}});
  ASSERT_EQ(m.atoms().size(), 2u);
  EXPECT_DOUBLE_EQ(m.integrate([](double x) { return x; }), 1.5);
  EXPECT_DOUBLE_EQ(m.support_min(), 1.0);
  EXPECT_DOUBLE_EQ(m.support_max(), 2.0);
}

TEST(Discrete, DuplicatesMerge) {
  const auto m = make_discrete({{1.0, 0.5}, {1.0, 0.5}});
  EXPECT_TRUE(m.is_point_mass());
  EXPECT_EQ(m, make_point_mass(1.0));
  const auto near = make_discrete({{1.0, 0.5}, {1.0 + 1e-14, 0.5}});
  EXPECT_TRUE(near.is_point_mass());
}

TEST(Discrete, RenormalizesSmallDrift) {
  const auto m = make_discrete({{1.0, 0.5 + 4e-10}, {3.0, 0.5}});
  double s = 0.0;
  for (const auto& a : m.atoms()) s += a.weight;
  EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(Discrete, Rejections) {
  EXPECT_THROW(make_discrete({}), std::invalid_argument);
  EXPECT_THROW(make_discrete({{0.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(make_discrete({{-1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(make_discrete({{1.0, 0.0}, {2.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(make_discrete({{1.0, 0.6}, {2.0, 0.6}}), std::invalid_argument);
  EXPECT_THROW(make_discrete({{1.0, 0.5}, {2.0, 0.5 + 1e-8}}), std::invalid_argument);
}

TEST(MarchenkoPastur, SupportAtHalf) {
  const auto m = make_mp(0.5);
  EXPECT_NEAR(m.support_min(), 0.0857864376, 1e-9);
  EXPECT_NEAR(m.support_max(), 2.9142135624, 1e-9);
}

TEST(MarchenkoPastur, RejectsOutsideUnitInterval) {
  EXPECT_THROW(make_mp(0.0), std::invalid_argument);
  EXPECT_THROW(make_mp(1.0), std::invalid_argument);
  EXPECT_THROW(make_mp(-0.2), std::invalid_argument);
  EXPECT_THROW(make_mp(1.5), std::invalid_argument);
}

TEST(MarchenkoPastur, MassAndMoments) {
  for (double psi : {0.05, 0.25, 0.5, 0.8, 0.95}) {
    const auto m = make_mp(psi);
    EXPECT_NEAR(m.integrate([](double) { return 1.0; }), 1.0, 1e-8) << psi;
    EXPECT_NEAR(m.integrate([](double x) { return x; }), 1.0, 1e-8) << psi;
    EXPECT_NEAR(m.integrate([](double x) { return x * x; }), 1.0 + psi, 1e-6) << psi;
  }
}

TEST(MarchenkoPastur, QuadratureMatchesStieltjes) {
  const auto m = make_mp(0.5);
  const double q = m.integrate([](double x) { return 1.0 / (x + 1.0); });
  EXPECT_NEAR(q, mp_stieltjes_oracle(0.5, -1.0), 1e-8);
  EXPECT_NEAR(q, 0.5615528128, 1e-9);
  for (double psi : {0.1, 0.3, 0.7, 0.9})
    for (double z : {-0.1, -1.0, -5.0}) {
      const auto mp = make_mp(psi);
      const double v = mp.integrate([z](double x) { return 1.0 / (x - z); });
      EXPECT_NEAR(v, mp_stieltjes_oracle(psi, z), 1e-8 * std::abs(v)) << psi << " " << z;
      EXPECT_NEAR(mp_stieltjes_negative_axis(psi, z), mp_stieltjes_oracle(psi, z), 1e-12);
    }
}

TEST(MarchenkoPastur, MomentsAgreeWithSimulatedSketchGram) {
  // S is m x n with N(0, 1/n) entries; the eigenvalues of S S^T follow MP(m/n).
  const Eigen::Index m = 500, n = 1000;
  const Eigen::MatrixXd S = gaussian_matrix(m, n, 17, 1.0 / std::sqrt(static_cast<double>(n)));
  const Eigen::MatrixXd G = S * S.transpose();
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues();
  const auto mp = make_mp(0.5);
  EXPECT_NEAR(ev.mean(), mp.integrate([](double x) { return x; }), 0.01);
  EXPECT_NEAR(ev.array().square().mean(), mp.integrate([](double x) { return x * x; }), 0.03);
}

TEST(Integrate, PointEvaluationAndWeightedSum) {
  EXPECT_DOUBLE_EQ(make_point_mass(1.0).integrate([](double x) { return x * x; }), 1.0);
  EXPECT_DOUBLE_EQ(make_discrete({{2.0, 0.5}, {1.0, 0.5}}).integrate([](double x) { return x; }), 1.5);
}

TEST(Integrate, SignalsNonFiniteIntegrand) {
  const auto d = make_point_mass(1.0);
  EXPECT_THROW(d.integrate([](double x) { return 1.0 / (x - 1.0); }), std::domain_error);
  const auto m = make_mp(0.5);
  EXPECT_THROW(m.integrate([](double) { return std::numeric_limits<double>::quiet_NaN(); }), std::domain_error);
}

TEST(Integrate, UnitMassAndExactnessOnRandomDiscreteMeasures) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> loc(0.1, 10.0), w(0.01, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<Atom> atoms(1 + t % 6);
    double total = 0.0;
    for (auto& a : atoms) {
      a = {loc(rng), w(rng)};
      total += a.weight;
    }
    for (auto& a : atoms) a.weight /= total;
    const auto m = make_discrete(atoms);
    EXPECT_NEAR(m.integrate([](double) { return 1.0; }), 1.0, 1e-12);
    double direct = 0.0;
    for (const auto& a : m.atoms()) direct += a.weight * std::log(a.location);
    EXPECT_NEAR(m.integrate([](double x) { return std::log(x); }), direct, 1e-14 * (1.0 + std::abs(direct)));
  }
}

TEST(Json, RoundTrip) {
  const auto d = make_discrete({{2.0, 0.5}, {1.0, 0.5}});
  nlohmann::json j;
  to_json(j, d);
  EXPECT_EQ(j.at("kind"), "discrete");
  EXPECT_EQ(measure_from_json(j), d);

  nlohmann::json k;
  to_json(k, make_mp(0.3));
  EXPECT_EQ(k.at("kind"), "mp");
  EXPECT_DOUBLE_EQ(k.at("psi").get<double>(), 0.3);
  EXPECT_EQ(measure_from_json(k), make_mp(0.3));

  EXPECT_THROW(measure_from_json(nlohmann::json{{"kind", "gamma"}}), std::invalid_argument);
}
