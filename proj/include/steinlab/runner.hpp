#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "steinlab/breuer_major.hpp"
#include "steinlab/chaos.hpp"
#include "steinlab/config.hpp"
#include "steinlab/neural_net.hpp"
#include "steinlab/parallel.hpp"
#include "steinlab/report.hpp"
#include "steinlab/spde.hpp"
#include "steinlab/stein.hpp"

namespace steinlab {

inline constexpr const char* kVersion = "0.1.0";

/// SplitMix-style seed derivation so per-experiment streams never collide.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct SectionReport {
  std::vector<CheckResult> checks;
  nlohmann::json data = nlohmann::json::object();
  std::vector<std::string> outputs;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) j["checks"].push_back(c.to_json());
    j["data"] = data;
    return j;
  }
};

namespace detail_run {

/// Running mean / entrywise variance of a matrix-valued Monte Carlo stream,
/// aggregated into one Hilbert-Schmidt standard error.
struct MatrixStat {
  Eigen::MatrixXd sum, sum_sq;
  std::size_t n = 0;

  explicit MatrixStat(int p) : sum(Eigen::MatrixXd::Zero(p, p)), sum_sq(Eigen::MatrixXd::Zero(p, p)) {}

  void add(const Eigen::MatrixXd& x) {
    sum += x;
    sum_sq += x.cwiseProduct(x);
    ++n;
  }

  void merge(const MatrixStat& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    n += o.n;
  }

  Eigen::MatrixXd mean() const { return sum / static_cast<double>(n); }

  double se_hs() const {
    const Eigen::MatrixXd m = mean();
    const Eigen::MatrixXd var = (sum_sq / static_cast<double>(n) - m.cwiseProduct(m)).cwiseMax(0.0);
    return std::sqrt(var.sum() / static_cast<double>(n));
  }
};

inline std::string bool_cell(bool pass) { return pass ? "pass" : "fail"; }

}  // namespace detail_run

class Runner {
 public:
  explicit Runner(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    validate_config(cfg_);
    threads_ = resolve_threads(cfg_.threads);
  }

  /// Executes the subcommand, writes artifacts, returns the exit code:
  /// 0 all assertions pass, 1 otherwise.
  int run(const std::string& subcommand) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.output_dir);

    std::map<std::string, SectionReport> sections;
    if (subcommand == "selftest" || subcommand == "all") sections["selftest"] = run_selftest();
    if (subcommand == "bounds" || subcommand == "all") sections["bounds"] = run_bounds();
    if (subcommand == "breuer-major" || subcommand == "all") sections["breuer_major"] = run_breuer_major();
    if (subcommand == "neural-net" || subcommand == "all") sections["neural_net"] = run_neural_net();
    if (subcommand == "spde" || subcommand == "all") sections["spde"] = run_spde();
    if (sections.empty()) throw ConfigError("unknown subcommand '" + subcommand + "'");

    nlohmann::json summary;
    summary["schema"] = 1;
    summary["seed"] = cfg_.seed;
    summary["threads"] = threads_;
    summary["subcommand"] = subcommand;
    summary["experiments"] = nlohmann::json::object();
    nlohmann::json failures = nlohmann::json::array();
    bool all_pass = true;
    std::vector<std::string> outputs;
    for (const auto& [name, sec] : sections) {
      summary["experiments"][name] = sec.to_json();
      for (const auto& c : sec.checks)
        if (!c.pass) {
          failures.push_back(name + "/" + c.name);
          all_pass = false;
        }
      for (const auto& f : sec.outputs) outputs.push_back(f);
    }
    summary["failures"] = failures;
    summary["all_pass"] = all_pass;

    const std::string summary_path = path("summary.json");
    std::ofstream(summary_path, std::ios::binary) << summary.dump(2) << "\n";
    outputs.push_back("summary.json");

    RunManifest manifest;
    manifest.config_hash = fnv1a64(cfg_.canonical());
    manifest.seed = cfg_.seed;
    manifest.threads = threads_;
    manifest.timestamp = RunManifest::now_utc();
    for (const char* mod : {"tensor-core", "wiener-chaos", "stein-bounds", "app-breuer-major",
                            "app-neural-net", "app-spde", "cli-runner"})
      manifest.module_versions.emplace_back(mod, kVersion);
    manifest.outputs = outputs;
    std::ofstream(path("manifest.json"), std::ios::binary) << manifest.to_json().dump(2) << "\n";

    return all_pass ? 0 : 1;
  }

 private:
  std::string path(const std::string& file) const {
    return (std::filesystem::path(cfg_.output_dir) / file).string();
  }

  // ---------------------------------------------------------------- selftest

  SectionReport run_selftest() {
    const SelftestConfig& sc = cfg_.selftest;
    const HilbertSpec spec = HilbertSpec::euclidean(sc.m, sc.p);
    SectionReport rep;

    double worst_ldd = 0.0, worst_semigroup = 0.0, worst_pseudo = 0.0, worst_delta = 0.0;
    double worst_poincare = -1e300, worst_equality = 0.0;
    for (int id = 0; id < sc.n_functionals; ++id) {
      ChaosFunctional F = random_functional(spec, sc.max_order, cfg_.seed, static_cast<std::uint64_t>(id), false);
      ChaosFunctional Fc = F;
      Fc.mean().setZero();

      // L = -delta D
      const ChaosFunctional delta_d = divergence(malliavin_derivative(Fc, 1));
      ChaosFunctional minus_l = ou_generator(Fc);
      for (int n = 1; n <= minus_l.max_order(); ++n) minus_l.kernel(n).scale(-1.0);
      worst_ldd = std::max(worst_ldd, kernel_distance(delta_d, minus_l));

      // P_t P_s = P_{t+s}
      worst_semigroup = std::max(
          worst_semigroup, kernel_distance(ou_semigroup(ou_semigroup(F, 0.3), 0.45), ou_semigroup(F, 0.75)));

      // L L^{-1} F = F - E[F]
      ChaosFunctional centered = F;
      centered.mean().setZero();
      worst_pseudo =
          std::max(worst_pseudo, kernel_distance(ou_generator(ou_pseudo_inverse(F).value), centered));

      // delta(phi) = I_1(phi) for deterministic phi in H (x) K
      ChaosField phi(spec, 1);
      auto& comp = phi.add_component(0);
      CounterRng rng(mix_seed(cfg_.seed, 9000 + id), RngStream::kKernelInit, 0);
      for (double& v : comp.data) v = rng.normal();
      const ChaosFunctional dphi = divergence(phi);
      double delta_err = dphi.mean().lpNorm<Eigen::Infinity>();
      for (std::size_t q = 0; q < comp.data.size(); ++q)
        delta_err = std::max(delta_err, std::abs(dphi.kernel(1).data()[q] - comp.data[q]));
      worst_delta = std::max(worst_delta, delta_err);

      // Gaussian Poincare: Var <= E||DF||^2, equality without orders >= 2.
      const double var = Fc.total_variance();
      const double energy = malliavin_derivative(Fc, 1).expected_sq_norm();
      worst_poincare = std::max(worst_poincare, var - energy);
      ChaosFunctional first(spec, 1);
      first.kernel(1) = Fc.kernel(1);
      worst_equality = std::max(
          worst_equality, std::abs(first.total_variance() - malliavin_derivative(first, 1).expected_sq_norm()));
    }
    rep.checks.push_back(CheckResult::leq("op_identity_L_eq_minus_deltaD", worst_ldd, 1e-12));
    rep.checks.push_back(CheckResult::leq("op_identity_semigroup", worst_semigroup, 1e-12));
    rep.checks.push_back(CheckResult::leq("op_identity_pseudo_inverse", worst_pseudo, 1e-12));
    rep.checks.push_back(CheckResult::leq("op_identity_delta_of_deterministic", worst_delta, 1e-12));
    rep.checks.push_back(CheckResult::leq("poincare_variance_gap", worst_poincare, 1e-12));
    rep.checks.push_back(CheckResult::leq("poincare_first_chaos_equality", worst_equality, 1e-12));

    // Cross-order orthogonality is exact by construction of chaos_inner.
    {
      ChaosFunctional f1(spec, 1), f2(spec, 2);
      CounterRng rng(mix_seed(cfg_.seed, 991), RngStream::kKernelInit, 0);
      for (double& v : f1.kernel(1).data()) v = rng.normal();
      for (double& v : f2.kernel(2).data()) v = rng.normal();
      rep.checks.push_back(
          CheckResult::leq("orthogonality_cross_order", chaos_inner(f1, f2).op.entries.norm(), 0.0));
    }

    // Isometry: MC covariance of eval against chaos_inner, 3 standard errors.
    {
      const ChaosFunctional F = random_functional(spec, sc.max_order, mix_seed(cfg_.seed, 1001), 0);
      const KOperator exact = covariance_operator(F);
      using detail_run::MatrixStat;
      MatrixStat stat = parallel_blocks(
          static_cast<std::size_t>(sc.n_mc_identity), threads_, kMcBlockSize, MatrixStat(spec.p),
          [&](std::size_t lo, std::size_t hi) {
            MatrixStat s(spec.p);
            for (std::size_t rep_i = lo; rep_i < hi; ++rep_i) {
              const Eigen::VectorXd v =
                  F.eval(sample_draw(spec, mix_seed(cfg_.seed, 1002), RngStream::kChaosDraw, rep_i));
              s.add(v * v.transpose());
            }
            return s;
          },
          [](MatrixStat& a, const MatrixStat& b) { a.merge(b); });
      const double dist = (stat.mean() - exact.entries).norm();
      rep.checks.push_back(CheckResult::leq("isometry_mc_vs_exact", dist, 3.0 * stat.se_hs()));
    }

    // Mehler identity at each configured t.
    for (std::size_t ti = 0; ti < sc.mehler_t.size(); ++ti) {
      const double t = sc.mehler_t[ti];
      const ChaosFunctional F = random_functional(spec, sc.max_order, mix_seed(cfg_.seed, 1100), 1, false);
      const GaussianDraw base = sample_draw(spec, mix_seed(cfg_.seed, 1101), RngStream::kChaosDraw, 0);
      const Eigen::VectorXd analytic = ou_semigroup(F, t).eval(base);
      struct Partial {
        Eigen::VectorXd sum;
        double sum_sq = 0.0;
      };
      Partial init{Eigen::VectorXd::Zero(spec.p), 0.0};
      const Partial tot = parallel_blocks(
          static_cast<std::size_t>(sc.n_mc_mehler), threads_, kMcBlockSize, init,
          [&](std::size_t lo, std::size_t hi) {
            Partial p{Eigen::VectorXd::Zero(spec.p), 0.0};
            for (std::size_t rep_i = lo; rep_i < hi; ++rep_i) {
              const Eigen::VectorXd v =
                  F.eval(mehler_coupled_draw(base, mix_seed(cfg_.seed, 1102 + ti), rep_i, t));
              p.sum += v;
              p.sum_sq += (v - analytic).squaredNorm();
            }
            return p;
          },
          [](Partial& a, const Partial& b) {
            a.sum += b.sum;
            a.sum_sq += b.sum_sq;
          });
      const Eigen::VectorXd mc = tot.sum / sc.n_mc_mehler;
      const double se = std::sqrt(tot.sum_sq / sc.n_mc_mehler / sc.n_mc_mehler);
      rep.checks.push_back(CheckResult::leq("mehler_t" + format_double(t), (mc - analytic).norm(), 3.0 * se));
    }

    CsvWriter csv(path("selftest.csv"), {"check", "value", "threshold", "margin", "verdict"});
    for (const auto& c : rep.checks)
      csv.row({c.name, format_double(c.value), format_double(c.threshold),
               format_double(c.threshold - c.value), detail_run::bool_cell(c.pass)});
    rep.outputs.push_back("selftest.csv");
    return rep;
  }

  // ------------------------------------------------------------------ bounds

  SectionReport run_bounds() {
    const BoundsConfig& bc = cfg_.bounds;
    const HilbertSpec spec = HilbertSpec::euclidean(bc.m, bc.p);
    SectionReport rep;
    CsvWriter csv(path("bounds.csv"), {"functional", "msbc", "gamma_term", "cov_gap", "thm1", "thm2",
                                       "d2_lower", "d2_lower_stderr", "verdict"});
    rep.data["reports"] = nlohmann::json::array();

    const auto dict = cosine_dictionary(spec.p, bc.dict_size, mix_seed(cfg_.seed, 2000));
    double worst_domination = -1e300;
    double worst_gamma_gap = -1e300;
    bool all_ordered = true;

    for (int id = 0; id < bc.n_functionals; ++id) {
      const std::uint64_t fseed = mix_seed(cfg_.seed, 2100 + id);
      const ChaosFunctional F = random_functional(spec, bc.max_order, cfg_.seed, 50000 + id);
      const KOperator S = covariance_operator(F);

      const MsbcResult msbc = msbc_bound(F, S, bc.n_mc, fseed, threads_);
      const SecondOrderResult so = second_order_bounds(F, bc.n_mc, fseed, threads_);
      all_ordered = all_ordered && so.per_draw_ordered;

      // E[Gamma] vs S_F, aggregated HS distance against 3 standard errors.
      const GammaEvaluator gamma(F);
      using detail_run::MatrixStat;
      MatrixStat stat = parallel_blocks(
          static_cast<std::size_t>(bc.n_mc), threads_, kMcBlockSize, MatrixStat(spec.p),
          [&](std::size_t lo, std::size_t hi) {
            MatrixStat s(spec.p);
            for (std::size_t r = lo; r < hi; ++r)
              s.add(gamma.eval(sample_draw(spec, fseed, RngStream::kChaosDraw, r)));
            return s;
          },
          [](MatrixStat& a, const MatrixStat& b) { a.merge(b); });
      worst_gamma_gap = std::max(worst_gamma_gap, (stat.mean() - S.entries).norm() - 3.0 * stat.se_hs());

      const GaussianKSampler gz(S, fseed);
      const KSampler sf = [&](std::uint64_t r) {
        return F.eval(sample_draw(spec, fseed, RngStream::kChaosDraw, r));
      };
      const KSampler sz = [&](std::uint64_t r) { return gz(r); };
      const D2LowerResult d2 = d2_lower_estimate(sf, sz, dict, bc.n_mc, threads_);
      const double dom_margin = d2.value - (msbc.msbc + 3.0 * d2.stderr_);
      worst_domination = std::max(worst_domination, dom_margin);

      const bool row_pass = dom_margin <= 0.0 && so.per_draw_ordered;
      csv.row({std::to_string(id), format_double(msbc.msbc), format_double(msbc.gamma_term),
               format_double(msbc.cov_gap), format_double(so.thm1), format_double(so.thm2),
               format_double(d2.value), format_double(d2.stderr_), detail_run::bool_cell(row_pass)});

      nlohmann::json r;
      r["functional"] = id;
      r["msbc"] = msbc.msbc;
      r["msbc_triangle"] = {{"gamma_term", msbc.gamma_term}, {"cov_gap", msbc.cov_gap}};
      r["thm1"] = so.thm1;
      r["thm2"] = so.thm2;
      r["d2_lower"] = d2.value;
      r["d2_lower_stderr"] = d2.stderr_;
      r["pass"] = row_pass;
      rep.data["reports"].push_back(r);

      if (id < bc.n_snapshots) {
        const std::string snap = "kernels_" + std::to_string(id) + ".txt";
        std::ofstream os(path(snap), std::ios::binary);
        dump_kernels(F, os);
        rep.outputs.push_back(snap);
      }
    }
    rep.checks.push_back(CheckResult::leq("d2_lower_below_msbc_plus_3se", worst_domination, 0.0));
    rep.checks.push_back(CheckResult::leq("gamma_mean_matches_covariance", worst_gamma_gap, 0.0));
    rep.checks.push_back(CheckResult::leq("thm1_leq_thm2_per_draw", all_ordered ? 0.0 : 1.0, 0.0));
    rep.outputs.push_back("bounds.csv");
    return rep;
  }

  // ----------------------------------------------------------- breuer-major

  SectionReport run_breuer_major() {
    const BreuerMajorConfig& bm = cfg_.breuer_major;
    SectionReport rep;
    const MovingAverageModel model = MovingAverageModel::from_name(bm.kernel);
    const ScalarC2 f = scalar_function_from_name(bm.f);
    const HermiteCoefficients coeffs = hermite_expand(f.f, bm.hermite_q);
    rep.data["bessel_defect"] = coeffs.bessel_defect;
    rep.data["hermite_rank"] = coeffs.rank();

    const QuadratureRule r_rule = gauss_legendre(bm.r_nodes, 0.0, 1.0);
    const int p = bm.r_nodes;
    Eigen::VectorXd weights(p);
    for (int i = 0; i < p; ++i) weights(i) = r_rule.weights[i];
    const HilbertSpec kspec(1, p, weights);
    const auto dict = cosine_dictionary(p, bm.dict_size, mix_seed(cfg_.seed, 3000));
    const double sigma2 = sigma_limit(model, coeffs) * sigma_limit(model, coeffs);

    rep.data["m1_diagnostic"] = bm_m1_diagnostic(model, coeffs);

    CsvWriter csv(path("breuer_major.csv"), {"T", "bound", "d2_lower", "d2_stderr", "hs_CT_Cinf", "sigma2"});
    std::vector<double> ts, bounds, lowers;
    double worst_dom = -1e300;
    double prev_hs = 1e300;
    bool hs_monotone = true;

    for (std::size_t t_idx = 0; t_idx < bm.T_grid.size(); ++t_idx) {
      const double T = bm.T_grid[t_idx];
      const double bound = bm_theorem_bound(model, f, T);
      Eigen::MatrixXd ct(p, p), cinf(p, p);
      for (int i = 0; i < p; ++i) {
        for (int j = i; j < p; ++j) {
          ct(i, j) = ct(j, i) = covariance_CT(model, coeffs, r_rule.nodes[i], r_rule.nodes[j], T);
          cinf(i, j) = cinf(j, i) = covariance_Cinf(model, coeffs, r_rule.nodes[i], r_rule.nodes[j]);
        }
      }
      const Eigen::VectorXd sw = weights.cwiseSqrt();
      const KOperator s_t(Eigen::MatrixXd(sw.asDiagonal() * ct * sw.asDiagonal()));
      const KOperator s_inf(Eigen::MatrixXd(sw.asDiagonal() * cinf * sw.asDiagonal()));
      const double hs_gap = hs_distance(s_t, s_inf);
      if (hs_gap > prev_hs) hs_monotone = false;
      prev_hs = hs_gap;

      const std::uint64_t tseed = mix_seed(cfg_.seed, 3100 + t_idx);
      const BmSimulator sim(model, f, T, std::vector<double>(r_rule.nodes.begin(), r_rule.nodes.end()),
                            bm.delta);
      const GaussianKSampler gz(s_t, tseed);
      const KSampler sf = [&](std::uint64_t r) { return kspec.coords_from_values(sim.simulate(tseed, r)); };
      const KSampler sz = [&](std::uint64_t r) { return gz(r); };
      const D2LowerResult d2 = d2_lower_estimate(sf, sz, dict, bm.n_mc, threads_);
      worst_dom = std::max(worst_dom, d2.value - (bound + 3.0 * d2.stderr_));

      csv.row({format_double(T), format_double(bound), format_double(d2.value), format_double(d2.stderr_),
               format_double(hs_gap), format_double(sigma2)});
      ts.push_back(T);
      bounds.push_back(bound);
      lowers.push_back(d2.value);
    }
    rep.outputs.push_back("breuer_major.csv");

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      lx.push_back(std::log(ts[i]));
      ly.push_back(std::log(bounds[i]));
    }
    const double slope = fit_slope(lx, ly);
    rep.checks.push_back(CheckResult::leq("bound_slope_minus_half", std::abs(slope + 0.5), 1e-10));
    rep.checks.push_back(CheckResult::leq("d2_lower_below_bound", worst_dom, 0.0));
    rep.checks.push_back(CheckResult::leq("hs_CT_Cinf_nonincreasing", hs_monotone ? 0.0 : 1.0, 0.0));
    if (bm.f == "hermite2" && bm.kernel == "boxcar") {
      rep.checks.push_back(
          CheckResult::leq("sigma2_closed_form", std::abs(sigma2 - 8.0 / 3.0), 0.01 * (8.0 / 3.0)));
      const double c_expected = 2.0 * std::pow(3.0, 0.75);
      rep.checks.push_back(CheckResult::leq(
          "bound_constant_closed_form",
          std::abs(bm_theorem_bound(model, f, 1.0) - c_expected), 1e-10));
    }
    rep.data["slope"] = slope;
    rep.data["sigma2"] = sigma2;

    // Discretization bias: halve the time step once and difference the
    // exact grid-level variance of F_T(1) at the smallest horizon.
    {
      const double T = bm.T_grid.front();
      const BmSimulator coarse(model, f, T, {1.0}, bm.delta);
      const BmSimulator fine(model, f, T, {1.0}, bm.delta / 2.0);
      rep.data["discretization_bias"] =
          std::abs(coarse.discrete_variance_r1(coeffs) - fine.discrete_variance_r1(coeffs));
    }

    RatePlot plot("Breuer-Major rate", "T");
    plot.add_series("theorem bound", ts, bounds, "#1f77b4");
    plot.add_series("d2 lower estimate", ts, lowers, "#d62728");
    plot.write(path("breuer_major_rate.svg"));
    rep.outputs.push_back("breuer_major_rate.svg");
    return rep;
  }

  // ------------------------------------------------------------- neural-net

  SectionReport run_neural_net() {
    const NeuralNetConfig& nn = cfg_.neural_net;
    SectionReport rep;
    const ActivationSpec act = ActivationSpec::from_name(nn.activation);
    if (!act.envelope_holds()) throw ConfigError("neural_net: activation violates its envelope constants");
    const InputMeasure meas = InputMeasure::from_name(nn.nu, nn.nu_nodes);
    const int p = meas.size();
    Eigen::VectorXd weights = meas.weights;
    const HilbertSpec kspec(1, p, weights);
    const KOperator S = nn_covariance_operator(act, meas);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S.entries);
    rep.checks.push_back(CheckResult::leq("covariance_psd", -es.eigenvalues().minCoeff(), 1e-10));
    rep.data["nu_moment_2gamma4"] = meas.moment_2g4(act.gamma);

    const auto dict = cosine_dictionary(p, nn.dict_size, mix_seed(cfg_.seed, 4000));

    // Empirical covariances per width (union of the rate grid and the
    // width-independence check set).
    std::vector<int> widths;
    for (const double w : nn.n_grid) widths.push_back(static_cast<int>(w));
    for (const double w : nn.width_check) widths.push_back(static_cast<int>(w));
    std::sort(widths.begin(), widths.end());
    widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
    std::map<int, detail_run::MatrixStat> cov_stats;
    for (const int w : widths) {
      using detail_run::MatrixStat;
      const std::uint64_t wseed = mix_seed(cfg_.seed, 4100 + static_cast<std::uint64_t>(w));
      cov_stats.emplace(w, parallel_blocks(
                               static_cast<std::size_t>(nn.n_mc), threads_, kMcBlockSize, MatrixStat(p),
                               [&](std::size_t lo, std::size_t hi) {
                                 MatrixStat s(p);
                                 for (std::size_t r = lo; r < hi; ++r) {
                                   const Eigen::VectorXd v =
                                       kspec.coords_from_values(sample_network(w, act, meas, wseed, r));
                                   s.add(v * v.transpose());
                                 }
                                 return s;
                               },
                               [](detail_run::MatrixStat& a, const detail_run::MatrixStat& b) { a.merge(b); }));
    }

    // Pairwise width-independence, 3 aggregated standard errors.
    double worst_width = -1e300;
    for (std::size_t a = 0; a < nn.width_check.size(); ++a) {
      for (std::size_t b = a + 1; b < nn.width_check.size(); ++b) {
        const auto& sa = cov_stats.at(static_cast<int>(nn.width_check[a]));
        const auto& sb = cov_stats.at(static_cast<int>(nn.width_check[b]));
        const double dist = (sa.mean() - sb.mean()).norm();
        const double se = std::sqrt(sa.se_hs() * sa.se_hs() + sb.se_hs() * sb.se_hs());
        worst_width = std::max(worst_width, dist - 3.0 * se);
      }
    }
    rep.checks.push_back(CheckResult::leq("covariance_width_independent", worst_width, 0.0));

    CsvWriter csv(path("neural_net.csv"), {"n", "bound", "d2_lower", "d2_stderr", "cov_width_gap"});
    std::vector<double> ns, bounds, lowers;
    double worst_dom = -1e300;
    for (const double nw : nn.n_grid) {
      const int width = static_cast<int>(nw);
      const double bound = nn_theorem_bound(act, meas, width);
      const std::uint64_t wseed = mix_seed(cfg_.seed, 4100 + static_cast<std::uint64_t>(width));
      const GaussianKSampler gz(S, wseed);
      const KSampler sf = [&](std::uint64_t r) {
        return kspec.coords_from_values(sample_network(width, act, meas, wseed, r));
      };
      const KSampler sz = [&](std::uint64_t r) { return gz(r); };
      const D2LowerResult d2 = d2_lower_estimate(sf, sz, dict, nn.n_mc, threads_);
      worst_dom = std::max(worst_dom, d2.value - (bound + 3.0 * d2.stderr_));
      const double gap = (cov_stats.at(width).mean() - S.entries).norm();
      csv.row({std::to_string(width), format_double(bound), format_double(d2.value),
               format_double(d2.stderr_), format_double(gap)});
      ns.push_back(nw);
      bounds.push_back(bound);
      lowers.push_back(d2.value);
    }
    rep.outputs.push_back("neural_net.csv");

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      lx.push_back(std::log(ns[i]));
      ly.push_back(std::log(bounds[i]));
    }
    const double slope = fit_slope(lx, ly);
    rep.checks.push_back(CheckResult::leq("bound_slope_minus_half", std::abs(slope + 0.5), 1e-10));
    rep.checks.push_back(CheckResult::leq("d2_lower_below_bound", worst_dom, 0.0));
    rep.data["slope"] = slope;

    // Degenerate activation: constant tau has vanishing derivative blocks,
    // the network is exactly Gaussian, the bound is identically zero and the
    // measured distance is statistical noise.
    {
      const ActivationSpec flat = ActivationSpec::constant(1.0);
      const int width = static_cast<int>(nn.n_grid.back());
      const double bound0 = nn_theorem_bound(flat, meas, width);
      rep.checks.push_back(CheckResult::leq("degenerate_activation_bound_zero", bound0, 1e-12));
      const KOperator S0 = nn_covariance_operator(flat, meas);
      const std::uint64_t dseed = mix_seed(cfg_.seed, 4999);
      const GaussianKSampler gz(S0, dseed);
      const KSampler sf = [&](std::uint64_t r) {
        return kspec.coords_from_values(sample_network(width, flat, meas, dseed, r));
      };
      const KSampler sz = [&](std::uint64_t r) { return gz(r); };
      const D2LowerResult d2 = d2_lower_estimate(sf, sz, dict, nn.n_mc, threads_);
      rep.checks.push_back(
          CheckResult::leq("degenerate_activation_d2_zero", d2.value, 3.0 * d2.stderr_ + 1e-12));
    }

    RatePlot plot("Shallow network rate", "n");
    plot.add_series("theorem bound", ns, bounds, "#1f77b4");
    plot.add_series("d2 lower estimate", ns, lowers, "#d62728");
    plot.write(path("neural_net_rate.svg"));
    rep.outputs.push_back("neural_net_rate.svg");
    return rep;
  }

  // ------------------------------------------------------------------- spde

  SectionReport run_spde() {
    const SpdeConfig& sp = cfg_.spde;
    SectionReport rep;
    const NoiseSpec noise = NoiseSpec::exponential_gaussian();
    if (!noise.kernels_nonnegative() || !noise.gamma0_nontrivial())
      throw ConfigError("spde: noise kernels violate their structural conditions");
    rep.data["dalang_margin"] = noise.dalang_margin();

    PAMChaosModel model;
    model.T = sp.T;
    model.N_trunc = sp.N_trunc;
    model.time_nodes = {0, sp.t_nodes, sp.t_nodes, sp.t_nodes_order3};
    model.const_a = sp.const_a;
    model.const_b = sp.const_b;

    // Chaos-truncation diagnostic at (T, T, 0).
    const PamCovTerms terms = pam_covariance(model, noise, sp.T, sp.T, 0.0);
    const double trunc_ratio = terms.trunc_ratio();
    rep.checks.push_back(CheckResult::leq("trunc_ratio", trunc_ratio, sp.trunc_threshold));
    rep.data["pam_cov_orders"] = terms.per_order;

    if (sp.doubling_check) {
      PAMChaosModel doubled = model;
      doubled.time_nodes = {0, 2 * sp.t_nodes, 2 * sp.t_nodes, 2 * sp.t_nodes_order3};
      const double coarse = terms.total();
      const double fine = pam_covariance(doubled, noise, sp.T, sp.T, 0.0).total();
      const double rel = std::abs(fine - coarse) / std::max(1e-300, std::abs(fine));
      rep.checks.push_back(CheckResult::leq("quadrature_doubling_rel_change", rel, 0.01));
      rep.data["doubling_rel_change"] = rel;
    }

    // C_R and C_inf matrices on the [0, T] grid, all radii in one sweep.
    const QuadratureRule tg = gauss_legendre(sp.cov_grid, 0.0, sp.T);
    const int q = sp.cov_grid;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < q; ++i)
      for (int j = i; j < q; ++j) pairs.emplace_back(i, j);
    std::vector<SpatialCov> cell(pairs.size());
    parallel_blocks<int>(
        pairs.size(), threads_, 1, 0,
        [&](std::size_t lo, std::size_t hi) {
          for (std::size_t k = lo; k < hi; ++k)
            cell[k] = spatial_covariances(model, noise, tg.nodes[pairs[k].first], tg.nodes[pairs[k].second],
                                          sp.R_grid);
          return 0;
        },
        [](int&, const int&) {});

    std::vector<double> hs_gaps(sp.R_grid.size(), 0.0);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [i, j] = pairs[k];
      const double w = tg.weights[i] * tg.weights[j] * (i == j ? 1.0 : 2.0);
      for (std::size_t r = 0; r < sp.R_grid.size(); ++r) {
        const double diff = cell[k].C_inf - cell[k].C_R[r];
        hs_gaps[r] += w * diff * diff;
      }
    }
    for (double& g : hs_gaps) g = std::sqrt(g);

    bool hs_monotone = true;
    for (std::size_t r = 1; r < hs_gaps.size(); ++r)
      if (hs_gaps[r] > hs_gaps[r - 1]) hs_monotone = false;
    rep.checks.push_back(CheckResult::leq("hs_CR_Cinf_nonincreasing", hs_monotone ? 0.0 : 1.0, 0.0));

    // A* majorant against the closed-form substitution for this noise pair.
    double worst_astar = 0.0;
    for (const double R : sp.R_grid) {
      for (const auto& [r1, r2] : std::vector<std::pair<double, double>>{{0.2 * sp.T, 0.9 * sp.T},
                                                                          {sp.T, 0.5 * sp.T}}) {
        const double closed = 2.0 * R * std::pow(2.0 * (1.0 - std::exp(-std::max(r1, r2))), 3);
        worst_astar = std::max(worst_astar, std::abs(spde_astar_majorant(noise, R, r1, r2) - closed));
      }
    }
    rep.checks.push_back(CheckResult::leq("astar_closed_form", worst_astar, 1e-12));

    const QuadratureRule tq = gauss_legendre(sp.t_nodes, 0.0, sp.T);
    CsvWriter csv(path("spde.csv"), {"R", "A", "d2_bound", "hs_CR_Cinf", "trunc_ratio"});
    std::vector<double> rs, d2s;
    for (std::size_t r = 0; r < sp.R_grid.size(); ++r) {
      const SpdeBound b = spde_bound(model, noise, sp.R_grid[r], tq);
      csv.row({format_double(sp.R_grid[r]), format_double(b.A), format_double(b.d2_bound),
               format_double(hs_gaps[r]), format_double(trunc_ratio)});
      rs.push_back(sp.R_grid[r]);
      d2s.push_back(b.d2_bound);
    }
    rep.outputs.push_back("spde.csv");

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      lx.push_back(std::log(rs[i]));
      if (d2s[i] > 0.0) ly.push_back(std::log(d2s[i]));
    }
    if (ly.size() == lx.size() && lx.size() >= 2) {
      const double slope = fit_slope(lx, ly);
      rep.checks.push_back(CheckResult::leq("d2_bound_slope_minus_half", std::abs(slope + 0.5), 1e-10));
      rep.data["slope"] = slope;
    }
    rep.data["pathwise_d2_lower"] =
        "not measured: no pathwise sampler exists for Skorohod integration against temporally "
        "colored noise; covariance convergence stands in for the distance cross-check";

    RatePlot plot("PAM spatial-average rate", "R");
    plot.add_series("d2 bound", rs, d2s, "#1f77b4");
    plot.write(path("spde_rate.svg"));
    rep.outputs.push_back("spde_rate.svg");
    return rep;
  }

  static ScalarC2 scalar_function_from_name(const std::string& name) {
    if (name.rfind("hermite", 0) == 0) {
      const int q = std::stoi(name.substr(7));
      return hermite_function(q);
    }
    throw ConfigError("breuer_major: unknown subordinating function '" + name + "'");
  }

  ExperimentConfig cfg_;
  int threads_ = 1;
};

}  // namespace steinlab
