#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "steinlab/stein.hpp"

using namespace steinlab;

namespace {
const std::uint64_t kSeed = 424242;
}

TEST_CASE("covariance operator: first chaos, deterministic, MC oracle") {
  const HilbertSpec spec = HilbertSpec::euclidean(3, 2);
  ChaosFunctional f1(spec, 1);
  f1.kernel(1).at(std::span<const int>(std::vector<int>{0}.data(), 1), 0) = 1.0;
  f1.kernel(1).at(std::span<const int>(std::vector<int>{1}.data(), 1), 1) = 2.0;
  const KOperator S = covariance_operator(f1);
  REQUIRE(S.entries(0, 0) == Catch::Approx(1.0));
  REQUIRE(S.entries(1, 1) == Catch::Approx(4.0));
  REQUIRE(S.entries(0, 1) == Catch::Approx(0.0));

  ChaosFunctional det(spec, 0);
  det.mean() << 1.0, -2.0;
  REQUIRE(covariance_operator(det).entries.norm() == 0.0);

  const ChaosFunctional F = random_functional(spec, 3, kSeed, 1);
  const KOperator exact = covariance_operator(F);
  const int n_mc = 100000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(spec.p, spec.p);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(spec.p, spec.p);
  for (int rep = 0; rep < n_mc; ++rep) {
    const Eigen::VectorXd v = F.eval(sample_draw(spec, kSeed, RngStream::kChaosDraw, rep));
    const Eigen::MatrixXd prod = v * v.transpose();
    sum += prod;
    sum_sq += prod.cwiseProduct(prod);
  }
  const Eigen::MatrixXd mc = sum / n_mc;
  const Eigen::MatrixXd var = (sum_sq / n_mc - mc.cwiseProduct(mc)).cwiseMax(0.0);
  REQUIRE((mc - exact.entries).norm() < 3.0 * std::sqrt(var.sum() / n_mc));
}

TEST_CASE("gamma sample: first chaos is the constant covariance") {
  const HilbertSpec spec = HilbertSpec::euclidean(2, 2);
  ChaosFunctional f1(spec, 1);
  f1.kernel(1).at(std::span<const int>(std::vector<int>{0}.data(), 1), 0) = 1.0;
  f1.kernel(1).at(std::span<const int>(std::vector<int>{0}.data(), 1), 1) = 0.5;
  const KOperator S = covariance_operator(f1);
  for (int rep = 0; rep < 5; ++rep) {
    const GammaSample gs = gamma_sample(f1, sample_draw(spec, kSeed, RngStream::kChaosDraw, rep));
    REQUIRE((gs.matrix - S.entries).norm() < 1e-14);
  }
}

TEST_CASE("gamma sample: Gamma_11 = 2 g_1^2 for F = I2(h1 x h1 x k1)") {
  const HilbertSpec spec = HilbertSpec::euclidean(2, 1);
  ChaosFunctional F(spec, 2);
  F.kernel(2).at(std::span<const int>(std::vector<int>{0, 0}.data(), 2), 0) = 1.0;
  for (int rep = 0; rep < 5; ++rep) {
    const GaussianDraw d = sample_draw(spec, kSeed, RngStream::kChaosDraw, rep);
    const GammaSample gs = gamma_sample(F, d);
    REQUIRE(gs.matrix(0, 0) == Catch::Approx(2.0 * d.g(0) * d.g(0)).margin(1e-13));
  }
}

TEST_CASE("E[Gamma] converges to the covariance operator") {
  const HilbertSpec spec = HilbertSpec::euclidean(3, 2);
  const ChaosFunctional F = random_functional(spec, 3, kSeed, 7);
  const KOperator S = covariance_operator(F);
  const GammaEvaluator gamma(F);
  const int n_mc = 100000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(spec.p, spec.p);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(spec.p, spec.p);
  for (int rep = 0; rep < n_mc; ++rep) {
    const Eigen::MatrixXd g = gamma.eval(sample_draw(spec, kSeed, RngStream::kChaosDraw, rep));
    sum += g;
    sum_sq += g.cwiseProduct(g);
  }
  const Eigen::MatrixXd mc = sum / n_mc;
  const Eigen::MatrixXd var = (sum_sq / n_mc - mc.cwiseProduct(mc)).cwiseMax(0.0);
  REQUIRE((mc - S.entries).norm() < 3.0 * std::sqrt(var.sum() / n_mc));
}

TEST_CASE("msbc bound: exact zero for matched first chaos") {
  const HilbertSpec spec = HilbertSpec::euclidean(3, 2);
  ChaosFunctional f1(spec, 1);
  f1.kernel(1).at(std::span<const int>(std::vector<int>{0}.data(), 1), 0) = 1.3;
  f1.kernel(1).at(std::span<const int>(std::vector<int>{2}.data(), 1), 1) = -0.4;
  const MsbcResult r = msbc_bound(f1, covariance_operator(f1), 100, kSeed);
  REQUIRE(r.msbc < 1e-13);
  REQUIRE(r.gamma_term < 1e-13);
  REQUIRE(r.cov_gap == 0.0);
}

TEST_CASE("msbc bound: closed form sqrt(8)/2 for the pure second chaos") {
  const HilbertSpec spec = HilbertSpec::euclidean(1, 1);
  ChaosFunctional F(spec, 2);
  F.kernel(2).at(std::span<const int>(std::vector<int>{0, 0}.data(), 2), 0) = 1.0;
  const MsbcResult r = msbc_bound(F, covariance_operator(F), 200000, kSeed);
  // Gamma - S_F = 2 H2(g), E[4 H2^2] = 8:  msbc = sqrt(8)/2 = sqrt(2).
  REQUIRE(r.msbc == Catch::Approx(std::sqrt(2.0)).epsilon(0.02));
  REQUIRE(r.cov_gap == 0.0);
}

TEST_CASE("msbc bound: S_Z = 0 gives half the deterministic HS norm") {
  const HilbertSpec spec = HilbertSpec::euclidean(1, 1);
  ChaosFunctional F(spec, 1);
  F.kernel(1).at(std::span<const int>(std::vector<int>{0}.data(), 1), 0) = 1.0;
  const MsbcResult r = msbc_bound(F, KOperator::zero(1), 100, kSeed);
  REQUIRE(r.msbc == Catch::Approx(0.5).margin(1e-13));
  REQUIRE(r.cov_gap == Catch::Approx(0.5).margin(1e-13));
}

TEST_CASE("msbc errors: nonzero mean and tiny MC size rejected") {
  const HilbertSpec spec = HilbertSpec::euclidean(2, 1);
  ChaosFunctional F = random_functional(spec, 2, kSeed, 3, false);
  REQUIRE_THROWS_AS(msbc_bound(F, KOperator::zero(1), 100, kSeed), std::invalid_argument);
  ChaosFunctional G = random_functional(spec, 2, kSeed, 4);
  REQUIRE_THROWS_AS(msbc_bound(G, KOperator::zero(1), 1, kSeed), std::invalid_argument);
}

TEST_CASE("msbc triangle decomposition holds on the same sample") {
  const HilbertSpec spec = HilbertSpec::euclidean(3, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const ChaosFunctional F = random_functional(spec, 3, kSeed, 50 + trial);
    // Z with a deliberately different covariance.
    const ChaosFunctional H = random_functional(spec, 2, kSeed, 90 + trial);
    const KOperator S_Z = covariance_operator(H);
    const MsbcResult r = msbc_bound(F, S_Z, 2000, kSeed);
    REQUIRE(r.msbc <= r.gamma_term + r.cov_gap + 1e-12);
    REQUIRE(r.msbc >= 0.0);
    REQUIRE(r.gamma_term >= 0.0);
    REQUIRE(r.cov_gap >= 0.0);
  }
}

TEST_CASE("second-order bounds: zero for first chaos, closed form for I2") {
  const HilbertSpec spec = HilbertSpec::euclidean(2, 1);
  ChaosFunctional f1(spec, 1);
  f1.kernel(1).at(std::span<const int>(std::vector<int>{0}.data(), 1), 0) = 1.0;
  const SecondOrderResult r1 = second_order_bounds(f1, 100, kSeed);
  REQUIRE(r1.thm1 == 0.0);
  REQUIRE(r1.thm2 == 0.0);

  ChaosFunctional F(spec, 2);
  F.kernel(2).at(std::span<const int>(std::vector<int>{0, 0}.data(), 2), 0) = 1.0;
  const SecondOrderResult r2 = second_order_bounds(F, 200000, kSeed);
  // ||D^2F||_op = 2 deterministic; E||DF||^4 = 16 E g^4 = 48.
  REQUIRE(r2.thm1 == Catch::Approx(2.0 * std::pow(48.0, 0.25)).epsilon(0.02));
  REQUIRE(r2.per_draw_ordered);
  REQUIRE(r2.thm1 <= r2.thm2 * (1.0 + 1e-12));
}

TEST_CASE("second-order bounds: thm1 <= thm2 per draw on random functionals") {
  const HilbertSpec spec = HilbertSpec::euclidean(3, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const ChaosFunctional F = random_functional(spec, 4, kSeed, 500 + trial);
    const SecondOrderResult r = second_order_bounds(F, 500, kSeed);
    REQUIRE(r.per_draw_ordered);
    REQUIRE(r.thm1 <= r.thm2 * (1.0 + 1e-12));
  }
}

TEST_CASE("d2 lower estimate: identical samplers give exactly zero") {
  const HilbertSpec spec = HilbertSpec::euclidean(2, 2);
  const ChaosFunctional F = random_functional(spec, 2, kSeed, 8);
  const KSampler s = [&](std::uint64_t rep) {
    return F.eval(sample_draw(spec, kSeed, RngStream::kChaosDraw, rep));
  };
  const auto dict = cosine_dictionary(spec.p, 32, kSeed);
  const D2LowerResult r = d2_lower_estimate(s, s, dict, 2000);
  REQUIRE(r.value == 0.0);
  REQUIRE(r.stderr_ == 0.0);
}

TEST_CASE("d2 lower estimate: constant test functional contributes zero") {
  const HilbertSpec spec = HilbertSpec::euclidean(2, 2);
  const ChaosFunctional F = random_functional(spec, 2, kSeed, 9);
  const ChaosFunctional G = random_functional(spec, 2, kSeed, 10);
  const KSampler sf = [&](std::uint64_t rep) {
    return F.eval(sample_draw(spec, kSeed, RngStream::kChaosDraw, rep));
  };
  const KSampler sg = [&](std::uint64_t rep) {
    return G.eval(sample_draw(spec, kSeed, RngStream::kGaussianZ, rep));
  };
  std::vector<TestFunctional> dict = {TestFunctional::make(Eigen::VectorXd::Zero(2), 0.3)};
  const D2LowerResult r = d2_lower_estimate(sf, sg, dict, 500);
  REQUIRE(r.value == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("d2 lower estimate: 1-d gaussians with closed-form oracle") {
  // F ~ N(0,1), Z ~ N(0,4) on a one-node K.
  const KSampler sf = [](std::uint64_t rep) {
    CounterRng rng(kSeed, RngStream::kChaosDraw, rep);
    Eigen::VectorXd v(1);
    v(0) = rng.normal();
    return v;
  };
  const KSampler sz = [](std::uint64_t rep) {
    CounterRng rng(kSeed, RngStream::kGaussianZ, rep);
    Eigen::VectorXd v(1);
    v(0) = 2.0 * rng.normal();
    return v;
  };
  const auto dict = cosine_dictionary(1, 64, kSeed);
  const int n_mc = 200000;
  const D2LowerResult r = d2_lower_estimate(sf, sz, dict, n_mc);
  REQUIRE(r.value > 0.05);
  REQUIRE(r.stderr_ < r.value / 5.0);

  // Quadrature-free oracle: E cos(aX + b) = cos(b) exp(-a^2 sigma^2 / 2).
  double best = 0.0;
  for (const auto& phi : dict) {
    const double a = phi.a(0);
    const double diff = phi.c * std::cos(phi.b) * (std::exp(-0.5 * a * a) - std::exp(-2.0 * a * a));
    best = std::max(best, std::abs(diff));
  }
  REQUIRE(r.value == Catch::Approx(best).margin(5.0 * r.stderr_));

  // The analytic Gaussian expectation agrees with the sampler mean.
  KOperator S4(Eigen::MatrixXd::Constant(1, 1, 4.0));
  const GaussianKSampler gz(S4, kSeed);
  double mc = 0.0;
  for (int rep = 0; rep < n_mc; ++rep) mc += dict[0](gz(rep));
  mc /= n_mc;
  REQUIRE(mc == Catch::Approx(dict[0].gaussian_expectation(S4)).margin(0.01));
}

TEST_CASE("d2 lower is dominated by the msbc bound on random functionals") {
  const HilbertSpec spec = HilbertSpec::euclidean(3, 2);
  const auto dict = cosine_dictionary(spec.p, 64, kSeed);
  for (int trial = 0; trial < 5; ++trial) {
    const ChaosFunctional F = random_functional(spec, 3, kSeed, 700 + trial);
    const KOperator S = covariance_operator(F);
    const MsbcResult b = msbc_bound(F, S, 4000, kSeed);
    const GaussianKSampler gz(S, kSeed);
    const KSampler sf = [&](std::uint64_t rep) {
      return F.eval(sample_draw(spec, kSeed, RngStream::kChaosDraw, rep));
    };
    const KSampler sz = [&](std::uint64_t rep) { return gz(rep); };
    const D2LowerResult r = d2_lower_estimate(sf, sz, dict, 4000);
    REQUIRE(r.value <= b.msbc + 3.0 * r.stderr_ + 1e-9);
  }
}

TEST_CASE("d2 lower estimate rejects an empty dictionary") {
  const KSampler s = [](std::uint64_t) { return Eigen::VectorXd::Zero(1); };
  REQUIRE_THROWS_AS(d2_lower_estimate(s, s, {}, 100), std::invalid_argument);
}

TEST_CASE("test functionals respect the Frechet derivative caps") {
  for (const auto& phi : cosine_dictionary(5, 64, 99)) {
    const double na = phi.a.norm();
    REQUIRE(phi.c * na <= 1.0 + 1e-12);        // sup ||grad phi||
    REQUIRE(phi.c * na * na <= 1.0 + 1e-12);   // sup ||hessian phi||
    REQUIRE(phi.c <= 1.0 + 1e-12);
  }
}

TEST_CASE("gaussian sampler rejects indefinite covariance") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 0.0, 0.0, -0.5;
  REQUIRE_THROWS_AS(GaussianKSampler(KOperator(bad), kSeed), std::invalid_argument);
  // Small negative eigenvalues are clamped.
  Eigen::MatrixXd ok(2, 2);
  ok << 1.0, 0.0, 0.0, -1e-12;
  const GaussianKSampler s(KOperator(ok), kSeed);
  const Eigen::VectorXd v = s(0);
  REQUIRE(std::isfinite(v(0)));
}

TEST_CASE("imp bound quadrature: zero table, separable factorization, BM majorization") {
  DerivL4Tables t;
  t.nx = 4;
  t.nr = 3;
  t.mu_w = {0.3, 0.7, 0.5, 0.5};
  t.nu_w = {0.2, 0.4, 0.4};
  t.d2.assign(static_cast<std::size_t>(4) * 4 * 3, 0.0);
  t.d1.assign(static_cast<std::size_t>(4) * 3, 1.0);
  REQUIRE(imp_bound_quadrature(t) == 0.0);

  // Separable tables: T2 = u(x)u(y)v(r), T1 = w(x)v(r) factorize in closed
  // form; cross-checked against the direct nested loop.
  const std::vector<double> u = {0.5, 1.0, 0.25, 0.75};
  const std::vector<double> wv = {1.0, 0.5, 0.75, 0.3};
  const std::vector<double> vr = {0.9, 1.1, 0.4};
  for (int x = 0; x < 4; ++x) {
    for (int r = 0; r < 3; ++r) {
      t.d1[static_cast<std::size_t>(x) * 3 + r] = wv[x] * vr[r];
      for (int y = 0; y < 4; ++y) t.d2[(static_cast<std::size_t>(x) * 4 + y) * 3 + r] = u[x] * u[y] * vr[r];
    }
  }
  double sv2 = 0.0, su2 = 0.0, suw = 0.0;
  for (int r = 0; r < 3; ++r) sv2 += t.nu_w[r] * vr[r] * vr[r];
  for (int x = 0; x < 4; ++x) {
    su2 += t.mu_w[x] * u[x] * u[x];
    suw += t.mu_w[x] * u[x] * wv[x];
  }
  const double closed = sv2 * sv2 * su2 * suw * suw;
  double nested = 0.0;
  for (int r1 = 0; r1 < 3; ++r1)
    for (int r2 = 0; r2 < 3; ++r2)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
          for (int z = 0; z < 4; ++z)
            nested += t.nu_w[r1] * t.nu_w[r2] * t.mu_w[y] * t.mu_w[x] * t.mu_w[z] *
                      t.d2[(static_cast<std::size_t>(x) * 4 + y) * 3 + r1] *
                      t.d2[(static_cast<std::size_t>(z) * 4 + y) * 3 + r1] *
                      t.d1[static_cast<std::size_t>(x) * 3 + r2] *
                      t.d1[static_cast<std::size_t>(z) * 3 + r2];
  REQUIRE(nested == Catch::Approx(closed).epsilon(1e-12));
  const double via_imp = imp_bound_quadrature(t);
  REQUIRE(via_imp == Catch::Approx(0.5 * std::sqrt(3.0) * std::sqrt(closed)).epsilon(1e-12));

  t.d1[0] = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(imp_bound_quadrature(t), std::invalid_argument);
}
