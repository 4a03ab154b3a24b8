// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria.  Criterion 9 shells out to the CLI binary (--cli <path>).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "steinlab/breuer_major.hpp"
#include "steinlab/chaos.hpp"
#include "steinlab/neural_net.hpp"
#include "steinlab/report.hpp"
#include "steinlab/runner.hpp"
#include "steinlab/spde.hpp"
#include "steinlab/stein.hpp"

using namespace steinlab;

namespace {

constexpr std::uint64_t kSeed = 71602;
int g_failures = 0;

class Criterion {
 public:
  Criterion(int number, std::string label) : number_(number), label_(std::move(label)) {
    start_ = std::chrono::steady_clock::now();
  }

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      details_.push_back(what);
    }
  }

  void expect_leq(double value, double threshold, const std::string& what) {
    std::ostringstream ss;
    ss << what << " (" << value << " vs " << threshold << ")";
    expect(value <= threshold, ss.str());
  }

  void note(const std::string& text) { notes_.push_back(text); }

  ~Criterion() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::printf("[%s] criterion %d: %s (%.1fs)", pass_ ? "PASS" : "FAIL", number_, label_.c_str(), secs);
    for (const auto& n : notes_) std::printf(" [%s]", n.c_str());
    std::printf("\n");
    for (const auto& d : details_) std::printf("        failed: %s\n", d.c_str());
    std::fflush(stdout);
    if (!pass_) ++g_failures;
  }

 private:
  int number_;
  std::string label_;
  bool pass_ = true;
  std::vector<std::string> details_;
  std::vector<std::string> notes_;
  std::chrono::steady_clock::time_point start_;
};

void criterion_1_operator_identities() {
  Criterion c(1, "operator identities exact to 1e-12 on 50 functionals (m=6, p=4, orders<=4)");
  const HilbertSpec spec = HilbertSpec::euclidean(6, 4);
  double worst = 0.0;
  for (int id = 0; id < 50; ++id) {
    ChaosFunctional F = random_functional(spec, 4, kSeed, static_cast<std::uint64_t>(id), false);
    ChaosFunctional Fc = F;
    Fc.mean().setZero();

    ChaosFunctional minus_l = ou_generator(Fc);
    for (int n = 1; n <= minus_l.max_order(); ++n) minus_l.kernel(n).scale(-1.0);
    worst = std::max(worst, kernel_distance(divergence(malliavin_derivative(Fc, 1)), minus_l));

    worst = std::max(worst, kernel_distance(ou_semigroup(ou_semigroup(F, 0.35), 0.4),
                                            ou_semigroup(F, 0.75)));

    ChaosFunctional centered = F;
    centered.mean().setZero();
    worst = std::max(worst, kernel_distance(ou_generator(ou_pseudo_inverse(F).value), centered));

    ChaosField phi(spec, 1);
    auto& comp = phi.add_component(0);
    CounterRng rng(mix_seed(kSeed, 100 + id), RngStream::kKernelInit, 0);
    for (double& v : comp.data) v = rng.normal();
    const ChaosFunctional dphi = divergence(phi);
    worst = std::max(worst, dphi.mean().lpNorm<Eigen::Infinity>());
    for (std::size_t q = 0; q < comp.data.size(); ++q)
      worst = std::max(worst, std::abs(dphi.kernel(1).data()[q] - comp.data[q]));
  }
  c.expect_leq(worst, 1e-12, "max kernel discrepancy across L=-deltaD, semigroup, LL^-1, delta(phi)");
}

void criterion_2_orthogonality_isometry() {
  Criterion c(2, "orthogonality exact, isometry within 3 stderr at 1e5 replicates");
  const HilbertSpec spec = HilbertSpec::euclidean(6, 4);

  ChaosFunctional f1(spec, 1), f3(spec, 3);
  CounterRng rng(mix_seed(kSeed, 200), RngStream::kKernelInit, 0);
  for (double& v : f1.kernel(1).data()) v = rng.normal();
  for (double& v : f3.kernel(3).data()) v = rng.normal();
  c.expect(chaos_inner(f1, f3).op.entries.norm() == 0.0, "cross-order inner product must be exactly 0");

  const int n_mc = 100000;
  for (int trial = 0; trial < 2; ++trial) {
    const ChaosFunctional F = random_functional(spec, 4, kSeed, 1000 + trial);
    const ChaosFunctional G = random_functional(spec, 4, kSeed, 2000 + trial);
    const Eigen::MatrixXd exact = chaos_inner(F, G).op.entries;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(spec.p, spec.p);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(spec.p, spec.p);
    const std::uint64_t dseed = mix_seed(kSeed, 210 + trial);
    for (int rep = 0; rep < n_mc; ++rep) {
      const GaussianDraw d = sample_draw(spec, dseed, RngStream::kChaosDraw, rep);
      const Eigen::MatrixXd prod = F.eval(d) * G.eval(d).transpose();
      sum += prod;
      sum_sq += prod.cwiseProduct(prod);
    }
    const Eigen::MatrixXd mc = sum / n_mc;
    const Eigen::MatrixXd var = (sum_sq / n_mc - mc.cwiseProduct(mc)).cwiseMax(0.0);
    const double se = std::sqrt(var.sum() / n_mc);
    c.expect_leq((mc - exact).norm(), 3.0 * se, "MC covariance vs chaos_inner, trial " + std::to_string(trial));
  }
}

void criterion_3_poincare() {
  Criterion c(3, "Gaussian Poincare on 50 functionals, equality to 1e-12 for first chaos");
  const HilbertSpec spec = HilbertSpec::euclidean(6, 4);
  double worst_gap = -1e300, worst_eq = 0.0;
  for (int id = 0; id < 50; ++id) {
    const ChaosFunctional F = random_functional(spec, 4, kSeed, 3000 + id);
    worst_gap = std::max(worst_gap, F.total_variance() - malliavin_derivative(F, 1).expected_sq_norm());
    ChaosFunctional first(spec, 1);
    first.kernel(1) = F.kernel(1);
    worst_eq = std::max(worst_eq, std::abs(first.total_variance() -
                                           malliavin_derivative(first, 1).expected_sq_norm()));
  }
  c.expect_leq(worst_gap, 1e-12, "Var(F) - E||DF||^2 must be <= 0");
  c.expect_leq(worst_eq, 1e-12, "equality when orders >= 2 vanish");
}

void criterion_4_mehler() {
  Criterion c(4, "Mehler identity within 3 stderr at t in {0.1, 1}, 1e5 couplings");
  const HilbertSpec spec = HilbertSpec::euclidean(6, 4);
  const ChaosFunctional F = random_functional(spec, 4, kSeed, 4000, false);
  const GaussianDraw base = sample_draw(spec, mix_seed(kSeed, 410), RngStream::kChaosDraw, 0);
  for (const double t : {0.1, 1.0}) {
    const Eigen::VectorXd analytic = ou_semigroup(F, t).eval(base);
    const int n_mc = 100000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(spec.p);
    double sum_sq = 0.0;
    const std::uint64_t cseed = mix_seed(kSeed, 420 + static_cast<std::uint64_t>(10 * t));
    for (int rep = 0; rep < n_mc; ++rep) {
      const Eigen::VectorXd v = F.eval(mehler_coupled_draw(base, cseed, rep, t));
      sum += v;
      sum_sq += (v - analytic).squaredNorm();
    }
    const double se = std::sqrt(sum_sq / n_mc / n_mc);
    c.expect_leq(((sum / n_mc) - analytic).norm(), 3.0 * se, "t = " + std::to_string(t));
  }
}

void criterion_5_stein_ordering() {
  Criterion c(5, "stein bounds on 50 functionals: domination, thm1<=thm2, E[Gamma]=S_F");
  const HilbertSpec spec = HilbertSpec::euclidean(6, 4);
  const auto dict = cosine_dictionary(spec.p, 128, mix_seed(kSeed, 500));
  const int n_mc = 10000;
  double worst_dom = -1e300, worst_gamma = -1e300;
  bool all_ordered = true;
  for (int id = 0; id < 50; ++id) {
    const ChaosFunctional F = random_functional(spec, 3, kSeed, 5000 + id);
    const KOperator S = covariance_operator(F);
    const std::uint64_t fseed = mix_seed(kSeed, 510 + id);

    const MsbcResult msbc = msbc_bound(F, S, n_mc, fseed, 2);
    const SecondOrderResult so = second_order_bounds(F, n_mc, fseed, 2);
    all_ordered = all_ordered && so.per_draw_ordered && so.thm1 <= so.thm2 * (1 + 1e-12);

    const GammaEvaluator gamma(F);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(spec.p, spec.p);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(spec.p, spec.p);
    for (int rep = 0; rep < n_mc; ++rep) {
      const Eigen::MatrixXd g = gamma.eval(sample_draw(spec, fseed, RngStream::kChaosDraw, rep));
      sum += g;
      sum_sq += g.cwiseProduct(g);
    }
    const Eigen::MatrixXd mc = sum / n_mc;
    const Eigen::MatrixXd var = (sum_sq / n_mc - mc.cwiseProduct(mc)).cwiseMax(0.0);
    worst_gamma = std::max(worst_gamma, (mc - S.entries).norm() - 3.0 * std::sqrt(var.sum() / n_mc));

    const GaussianKSampler gz(S, fseed);
    const KSampler sf = [&](std::uint64_t r) {
      return F.eval(sample_draw(spec, fseed, RngStream::kChaosDraw, r));
    };
    const KSampler sz = [&](std::uint64_t r) { return gz(r); };
    const D2LowerResult d2 = d2_lower_estimate(sf, sz, dict, n_mc, 2);
    worst_dom = std::max(worst_dom, d2.value - (msbc.msbc + 3.0 * d2.stderr_));
  }
  c.expect_leq(worst_dom, 0.0, "d2_lower <= msbc + 3 stderr");
  c.expect(all_ordered, "thm1 <= thm2 per draw");
  c.expect_leq(worst_gamma, 0.0, "E[Gamma] within 3 stderr of S_F");
}

void criterion_6_breuer_major() {
  Criterion c(6, "Breuer-Major: sigma2, constant, slope, domination, HS convergence");
  const MovingAverageModel model = MovingAverageModel::boxcar();
  const ScalarC2 f = hermite_function(2);
  const auto coeffs = hermite_expand(f.f, 12);

  const double sigma2 = sigma_limit(model, coeffs) * sigma_limit(model, coeffs);
  c.expect_leq(std::abs(sigma2 - 8.0 / 3.0), 0.01 * (8.0 / 3.0), "(a) sigma^2 = 8/3 within 1%");

  const double c_const = bm_theorem_bound(model, f, 1.0);
  c.expect_leq(std::abs(c_const - 2.0 * std::pow(3.0, 0.75)), 1e-10, "(b) constant 2*3^{3/4}");

  const std::vector<double> T_grid = {8.0, 16.0, 32.0, 64.0};
  std::vector<double> lx, ly;
  for (const double T : T_grid) {
    lx.push_back(std::log(T));
    ly.push_back(std::log(bm_theorem_bound(model, f, T)));
  }
  c.expect_leq(std::abs(fit_slope(lx, ly) + 0.5), 1e-10, "(c) log-log slope -0.5");

  const int p = 16;
  const QuadratureRule r_rule = gauss_legendre(p, 0.0, 1.0);
  Eigen::VectorXd weights(p);
  for (int i = 0; i < p; ++i) weights(i) = r_rule.weights[i];
  const HilbertSpec kspec(1, p, weights);
  const auto dict = cosine_dictionary(p, 128, mix_seed(kSeed, 600));
  const Eigen::VectorXd sw = weights.cwiseSqrt();

  double prev_hs = 1e300;
  bool monotone = true;
  for (const double T : T_grid) {
    Eigen::MatrixXd ct(p, p), cinf(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = i; j < p; ++j) {
        ct(i, j) = ct(j, i) = covariance_CT(model, coeffs, r_rule.nodes[i], r_rule.nodes[j], T);
        cinf(i, j) = cinf(j, i) = covariance_Cinf(model, coeffs, r_rule.nodes[i], r_rule.nodes[j]);
      }
    const double hs = (sw.asDiagonal() * (ct - cinf) * sw.asDiagonal()).norm();
    if (hs > prev_hs) monotone = false;
    prev_hs = hs;

    const std::uint64_t tseed = mix_seed(kSeed, 610 + static_cast<std::uint64_t>(T));
    const BmSimulator sim(model, f, T, std::vector<double>(r_rule.nodes.begin(), r_rule.nodes.end()));
    const KOperator s_t(Eigen::MatrixXd(sw.asDiagonal() * ct * sw.asDiagonal()));
    const GaussianKSampler gz(s_t, tseed);
    const KSampler sf = [&](std::uint64_t r) { return kspec.coords_from_values(sim.simulate(tseed, r)); };
    const KSampler sz = [&](std::uint64_t r) { return gz(r); };
    const D2LowerResult d2 = d2_lower_estimate(sf, sz, dict, 10000, 2);
    c.expect_leq(d2.value, bm_theorem_bound(model, f, T) + 3.0 * d2.stderr_,
                 "(d) domination at T = " + std::to_string(static_cast<int>(T)));
  }
  c.expect(monotone, "(e) ||C_T - C_inf|| nonincreasing in T");
}

void criterion_7_neural_net() {
  Criterion c(7, "shallow network: width-independence, slope, domination, degenerate tau");
  const ActivationSpec act = ActivationSpec::tanh_act();
  const InputMeasure meas = InputMeasure::uniform(16);
  const int p = meas.size();
  const HilbertSpec kspec(1, p, meas.weights);
  const KOperator S = nn_covariance_operator(act, meas);
  const auto dict = cosine_dictionary(p, 128, mix_seed(kSeed, 700));
  const int n_mc = 10000;

  // (a) covariance width-independence across n in {1, 16, 256}.
  struct Stat {
    Eigen::MatrixXd mean;
    double se;
  };
  std::vector<Stat> stats;
  for (const int width : {1, 16, 256}) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, p), sum_sq = Eigen::MatrixXd::Zero(p, p);
    const std::uint64_t wseed = mix_seed(kSeed, 710 + width);
    for (int rep = 0; rep < n_mc; ++rep) {
      const Eigen::VectorXd v = kspec.coords_from_values(sample_network(width, act, meas, wseed, rep));
      const Eigen::MatrixXd prod = v * v.transpose();
      sum += prod;
      sum_sq += prod.cwiseProduct(prod);
    }
    const Eigen::MatrixXd mc = sum / n_mc;
    const Eigen::MatrixXd var = (sum_sq / n_mc - mc.cwiseProduct(mc)).cwiseMax(0.0);
    stats.push_back({mc, std::sqrt(var.sum() / n_mc)});
  }
  for (std::size_t a = 0; a < stats.size(); ++a)
    for (std::size_t b = a + 1; b < stats.size(); ++b)
      c.expect_leq((stats[a].mean - stats[b].mean).norm(),
                   3.0 * std::sqrt(stats[a].se * stats[a].se + stats[b].se * stats[b].se),
                   "(a) covariance gap between widths");

  // (b) slope exactly -1/2.
  const std::vector<int> n_grid = {4, 16, 64, 256};
  std::vector<double> lx, ly;
  for (const int n : n_grid) {
    lx.push_back(std::log(n));
    ly.push_back(std::log(nn_theorem_bound(act, meas, n)));
  }
  c.expect_leq(std::abs(fit_slope(lx, ly) + 0.5), 1e-10, "(b) log-log slope -0.5");

  // (c) domination for each width.
  for (const int width : n_grid) {
    const std::uint64_t wseed = mix_seed(kSeed, 730 + width);
    const GaussianKSampler gz(S, wseed);
    const KSampler sf = [&](std::uint64_t r) {
      return kspec.coords_from_values(sample_network(width, act, meas, wseed, r));
    };
    const KSampler sz = [&](std::uint64_t r) { return gz(r); };
    const D2LowerResult d2 = d2_lower_estimate(sf, sz, dict, n_mc, 2);
    c.expect_leq(d2.value, nn_theorem_bound(act, meas, width) + 3.0 * d2.stderr_,
                 "(c) domination at n = " + std::to_string(width));
  }

  // (d) degenerate (zero-slope) tau: every derivative block vanishes, the
  // network is exactly Gaussian, the bound is identically zero.
  const ActivationSpec flat = ActivationSpec::constant(1.0);
  c.expect_leq(nn_theorem_bound(flat, meas, 256), 1e-12, "(d) bound is 0 for degenerate tau");
  const KOperator S0 = nn_covariance_operator(flat, meas);
  const std::uint64_t dseed = mix_seed(kSeed, 790);
  const GaussianKSampler gz0(S0, dseed);
  const KSampler sf0 = [&](std::uint64_t r) {
    return kspec.coords_from_values(sample_network(256, flat, meas, dseed, r));
  };
  const KSampler sz0 = [&](std::uint64_t r) { return gz0(r); };
  const D2LowerResult d20 = d2_lower_estimate(sf0, sz0, dict, n_mc, 2);
  c.expect_leq(d20.value, 3.0 * d20.stderr_ + 1e-12, "(d) d2_lower ~ 0 for degenerate tau");
}

void criterion_8_spde() {
  Criterion c(8, "PAM spatial averages: slope, A* closed form, HS convergence, truncation");
  c.note("no pathwise d2 measurement: Skorohod integration against temporally colored noise has no sampler; covariance convergence substitutes");
  const NoiseSpec noise = NoiseSpec::exponential_gaussian();
  PAMChaosModel model;
  model.T = 1.0;
  model.N_trunc = 3;

  const std::vector<double> radii = {2.0, 4.0, 8.0, 16.0};
  const QuadratureRule tq = gauss_legendre(16, 0.0, model.T);
  std::vector<double> lx, ly;
  for (const double R : radii) {
    lx.push_back(std::log(R));
    ly.push_back(std::log(spde_bound(model, noise, R, tq).d2_bound));
  }
  c.expect_leq(std::abs(fit_slope(lx, ly) + 0.5), 1e-10, "(a) log-log slope -d/2");

  double worst_astar = 0.0;
  for (const double R : radii)
    for (const auto& [r1, r2] : std::vector<std::pair<double, double>>{{0.2, 0.9}, {1.0, 0.5}}) {
      const double closed = 2.0 * R * std::pow(2.0 * (1.0 - std::exp(-std::max(r1, r2))), 3);
      worst_astar = std::max(worst_astar, std::abs(spde_astar_majorant(noise, R, r1, r2) - closed));
    }
  c.expect_leq(worst_astar, 1e-12, "(b) A* matches the closed-form substitution");

  const QuadratureRule tg = gauss_legendre(6, 0.0, model.T);
  std::vector<double> hs_sq(radii.size(), 0.0);
  for (std::size_t i = 0; i < tg.size(); ++i) {
    for (std::size_t j = i; j < tg.size(); ++j) {
      const SpatialCov sc = spatial_covariances(model, noise, tg.nodes[i], tg.nodes[j], radii);
      const double w = tg.weights[i] * tg.weights[j] * (i == j ? 1.0 : 2.0);
      for (std::size_t r = 0; r < radii.size(); ++r) {
        const double diff = sc.C_inf - sc.C_R[r];
        hs_sq[r] += w * diff * diff;
      }
    }
  }
  bool monotone = true;
  for (std::size_t r = 1; r < radii.size(); ++r)
    if (hs_sq[r] > hs_sq[r - 1]) monotone = false;
  c.expect(monotone, "(c) ||C_R - C_inf|| nonincreasing over R in {2,4,8,16}");

  const PamCovTerms terms = pam_covariance(model, noise, 1.0, 1.0, 0.0);
  c.expect_leq(terms.trunc_ratio(), 0.3, "(d) chaos-truncation ratio at N_trunc = 3, T = 1");
}

void criterion_9_determinism(const std::string& cli) {
  Criterion c(9, "byte-identical CSVs across reruns and thread counts {1, 4}");
  if (cli.empty()) {
    c.expect(false, "no --cli path provided");
    return;
  }
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "steinlab_determinism";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path cfg_path = base / "config.ini";
  {
    std::ofstream cfg(cfg_path);
    cfg << "seed = 99\n"
        << "[selftest]\nn_functionals = 6\nn_mc_identity = 3000\nn_mc_mehler = 3000\n"
        << "[bounds]\nn_functionals = 3\nn_mc = 1000\ndict_size = 32\n"
        << "[breuer_major]\nT_grid = 4 8\nr_nodes = 6\nn_mc = 300\ndict_size = 32\n"
        << "[neural_net]\nn_grid = 4 16\nwidth_check = 1 8\nnu_nodes = 6\nn_mc = 1000\ndict_size = 32\n"
        << "[spde]\nR_grid = 2 8\nN_trunc = 2\nt_nodes = 8\ncov_grid = 3\ndoubling_check = false\n";
  }
  const std::vector<std::pair<std::string, int>> runs = {{"a", 1}, {"b", 4}, {"c", 1}};
  for (const auto& [tag, threads] : runs) {
    std::ostringstream cmd;
    cmd << '"' << cli << '"' << " all --config " << cfg_path << " --threads " << threads << " --out "
        << (base / tag) << " > /dev/null 2>&1";
    const int rc = std::system(cmd.str().c_str());
    c.expect(rc == 0, "CLI run '" + tag + "' exited with " + std::to_string(rc));
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  for (const char* f : {"selftest.csv", "bounds.csv", "breuer_major.csv", "neural_net.csv", "spde.csv"}) {
    const std::string a = slurp(base / "a" / f);
    c.expect(!a.empty(), std::string(f) + " missing or empty");
    c.expect(a == slurp(base / "b" / f), std::string(f) + " differs between thread counts 1 and 4");
    c.expect(a == slurp(base / "c" / f), std::string(f) + " differs between identical reruns");
  }
  fs::remove_all(base);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--cli") cli = argv[i + 1];

  criterion_1_operator_identities();
  criterion_2_orthogonality_isometry();
  criterion_3_poincare();
  criterion_4_mehler();
  criterion_5_stein_ordering();
  criterion_6_breuer_major();
  criterion_7_neural_net();
  criterion_8_spde();
  criterion_9_determinism(cli);

  if (g_failures == 0) {
    std::printf("acceptance: all 9 criteria passed\n");
  } else {
    std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
  }
  return g_failures;
}
