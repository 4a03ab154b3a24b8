#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "steinlab/neural_net.hpp"

using namespace steinlab;

namespace {
const std::uint64_t kSeed = 31337;
}

TEST_CASE("network covariance closed forms") {
  const ActivationSpec id = ActivationSpec::identity();
  REQUIRE(nn_covariance(id, 0.3, -0.7) == Catch::Approx(0.3 * -0.7).margin(1e-12));

  ActivationSpec sq;
  sq.name = "square";
  sq.tau = [](double x) { return x * x; };
  sq.d1 = [](double x) { return 2.0 * x; };
  sq.d2 = [](double) { return 2.0; };
  sq.a = 1.0;
  sq.b = 1.0;
  sq.gamma = 2.0;
  REQUIRE(nn_covariance(sq, 0.5, 0.8) == Catch::Approx(3.0 * 0.25 * 0.64).epsilon(1e-10));

  const ActivationSpec cosact = ActivationSpec::cosine();
  const double x = 0.4, y = -0.9;
  const double want = 0.5 * (std::exp(-0.5 * (x - y) * (x - y)) + std::exp(-0.5 * (x + y) * (x + y)));
  REQUIRE(nn_covariance(cosact, x, y) == Catch::Approx(want).epsilon(1e-10));
}

TEST_CASE("sampled network: zero at origin for identity, centered for tanh") {
  const InputMeasure meas = InputMeasure::uniform(9);
  const ActivationSpec id = ActivationSpec::identity();
  // Put a node at zero explicitly.
  InputMeasure with_zero = meas;
  with_zero.nodes(4) = 0.0;
  const Eigen::VectorXd v = sample_network(8, id, with_zero, kSeed, 0);
  REQUIRE(v(4) == 0.0);

  const ActivationSpec th = ActivationSpec::tanh_act();
  const int n_mc = 20000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(meas.size());
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(meas.size());
  for (int rep = 0; rep < n_mc; ++rep) {
    const Eigen::VectorXd s = sample_network(16, th, meas, kSeed, rep);
    sum += s;
    sum_sq += s.cwiseProduct(s);
  }
  const Eigen::VectorXd mean = sum / n_mc;
  for (int i = 0; i < meas.size(); ++i) {
    const double var = sum_sq(i) / n_mc - mean(i) * mean(i);
    REQUIRE(std::abs(mean(i)) < 3.0 * std::sqrt(var / n_mc));
  }
}

TEST_CASE("empirical variance matches nn_covariance for widths 1, 16, 256") {
  const InputMeasure meas = InputMeasure::uniform(5);
  const ActivationSpec th = ActivationSpec::tanh_act();
  for (const int width : {1, 16, 256}) {
    const int n_mc = 20000;
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(meas.size());
    Eigen::VectorXd sum_4 = Eigen::VectorXd::Zero(meas.size());
    for (int rep = 0; rep < n_mc; ++rep) {
      const Eigen::VectorXd s = sample_network(width, th, meas, kSeed + width, rep);
      sum_sq += s.cwiseProduct(s);
      sum_4 += s.cwiseProduct(s).cwiseProduct(s.cwiseProduct(s));
    }
    for (int i = 0; i < meas.size(); ++i) {
      const double m2 = sum_sq(i) / n_mc;
      const double se = std::sqrt(std::max(0.0, sum_4(i) / n_mc - m2 * m2) / n_mc);
      const double want = nn_covariance(th, meas.nodes(i), meas.nodes(i));
      REQUIRE(m2 == Catch::Approx(want).margin(3.0 * se + 1e-12));
    }
  }
}

TEST_CASE("covariance operator on the node grid is symmetric PSD") {
  const InputMeasure meas = InputMeasure::uniform(16);
  const KOperator S = nn_covariance_operator(ActivationSpec::tanh_act(), meas);
  REQUIRE((S.entries - S.entries.transpose()).norm() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S.entries);
  REQUIRE(es.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("derivative tables: blocks, scaling, closed forms") {
  const InputMeasure meas = InputMeasure::uniform(7);
  const ActivationSpec id = ActivationSpec::identity();
  const NnDerivTables tab = nn_derivative_norm_tables(id, 4, meas);
  for (int i = 0; i < meas.size(); ++i) {
    REQUIRE(tab.t2(i) == 0.0);  // tau'' = 0: the (w0, w0) block vanishes
    REQUIRE(tab.d2_block(1, 1, i, meas) == 0.0);
    REQUIRE(tab.d2_block(0, 0, i, meas) == 0.0);
  }

  // Every entry carries exactly n^{-1/2}.
  const NnDerivTables tab4 = nn_derivative_norm_tables(id, 16, meas);
  for (int i = 0; i < meas.size(); ++i) {
    REQUIRE(tab4.d1_block(0, i, meas) == Catch::Approx(tab.d1_block(0, i, meas) / 2.0).epsilon(1e-14));
    REQUIRE(tab4.d2_block(0, 1, i, meas) == Catch::Approx(tab.d2_block(0, 1, i, meas) / 2.0).epsilon(1e-14));
  }

  // tau = H2: ||tau(G)||_4 at r = 1 is (E H2(G)^4)^{1/4} = 60^{1/4}.
  ActivationSpec h2;
  h2.name = "hermite2";
  h2.tau = [](double x) { return x * x - 1.0; };
  h2.d1 = [](double x) { return 2.0 * x; };
  h2.d2 = [](double) { return 2.0; };
  h2.a = 1.0;
  h2.b = 1.0;
  h2.gamma = 2.0;
  InputMeasure unit = InputMeasure::uniform(3);
  unit.nodes(2) = 1.0;
  const NnDerivTables tabh = nn_derivative_norm_tables(h2, 1, unit);
  REQUIRE(tabh.t0(2) == Catch::Approx(std::pow(60.0, 0.25)).epsilon(1e-10));
}

TEST_CASE("theorem bound: width scaling, degenerate activation, majorant domination") {
  const InputMeasure meas = InputMeasure::uniform(16);
  const ActivationSpec th = ActivationSpec::tanh_act();
  const double b4 = nn_theorem_bound(th, meas, 4);
  const double b16 = nn_theorem_bound(th, meas, 16);
  REQUIRE(b16 == Catch::Approx(b4 / 2.0).epsilon(1e-12));
  REQUIRE(b4 > 0.0);

  // Constant activation: all derivative blocks vanish, the network is
  // exactly Gaussian, and the bound is identically zero.
  REQUIRE(nn_theorem_bound(ActivationSpec::constant(1.0), meas, 64) == 0.0);

  for (const int width : {4, 64}) {
    REQUIRE(nn_theorem_bound(th, meas, width) <= nn_theorem_majorant(th, meas, width) * (1.0 + 1e-12));
  }
}

TEST_CASE("envelope validation") {
  REQUIRE(ActivationSpec::tanh_act().envelope_holds());
  REQUIRE(ActivationSpec::identity().envelope_holds());
  ActivationSpec bad = ActivationSpec::identity();
  bad.a = 0.1;
  bad.b = 0.0;
  REQUIRE_FALSE(bad.envelope_holds());
}

TEST_CASE("quadrature non-convergence is flagged") {
  // A wildly oscillating activation defeats the default quadrature order;
  // the doubling check must report that instead of returning garbage.
  ActivationSpec wiggly;
  wiggly.name = "wiggly";
  wiggly.tau = [](double x) { return std::cos(40.0 * x * x); };
  wiggly.d1 = [](double x) { return -80.0 * x * std::sin(40.0 * x * x); };
  wiggly.d2 = [](double) { return 0.0; };
  REQUIRE_THROWS_AS(nn_covariance(wiggly, 3.0, 2.0, 32), std::runtime_error);
}

TEST_CASE("input measure moment report") {
  const InputMeasure meas = InputMeasure::uniform(16);
  // int_{-1}^{1} |x|^{2g+4} dx / 2 = 1 / (2g + 5) for the uniform law.
  REQUIRE(meas.moment_2g4(1.0) == Catch::Approx(1.0 / 7.0).epsilon(1e-10));
}
