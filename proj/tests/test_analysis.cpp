#include <cmath>
#include <numbers>
#include <vector>

#include "catch_amalgamated.hpp"

#include "distill/analysis.hpp"
#include "distill/montecarlo.hpp"
#include "oracles.hpp"

using namespace distill;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using std::numbers::pi;

namespace {

GateMatrix random_unitary(RandomStream& rng) {
  return gates::rz(6.3 * rng.uniform()) * gates::ry(6.3 * rng.uniform()) * gates::rz(6.3 * rng.uniform());
}

TrialRecord heralded_record(const DensityMatrix& memories, double elapsed, long long n2 = 1) {
  TrialRecord t;
  t.stage = TrialStage::completed;
  t.n1 = 1;
  t.n2 = n2;
  t.signatures = HeraldSignature{Sign::plus, Sign::plus};
  t.readout_a = t.readout_b = 0;
  t.heralded = true;
  t.final_memory_state = memories;
  t.elapsed_time = elapsed;
  return t;
}

// Memory-frame state whose aligned form is `aligned` for a (+, +) herald.
DensityMatrix to_memory_frame(const DensityMatrix& aligned) { return undo_memory_frame(aligned); }

}  // namespace

TEST_CASE("bell_fidelity_from_paulis examples") {
  CHECK_THAT(bell_fidelity_from_paulis(1, 1, -1), WithinAbs(1.0, 1e-15));
  CHECK_THAT(bell_fidelity_from_paulis(0, 0, 0), WithinAbs(0.25, 1e-15));
  CHECK_THAT(bell_fidelity_from_paulis(-1, -1, -1, BellTarget::psi_minus), WithinAbs(1.0, 1e-15));
  CHECK_THROWS(bell_fidelity_from_paulis(1.2, 0, 0));
}

TEST_CASE("Bell fidelity from correlators equals the overlap") {
  RandomStream rng(51);
  for (int k = 0; k < 100; ++k) {
    const auto rho = states::random_mixed(2, rng);
    const auto c = correlators(rho);
    CHECK_THAT(c.fidelity(), WithinAbs(fidelity_with_pure(rho, states::psi_plus()), 1e-12));
    CHECK_THAT(c.fidelity(BellTarget::psi_minus), WithinAbs(fidelity_with_pure(rho, states::psi_minus()), 1e-12));
  }
}

TEST_CASE("log_negativity examples") {
  for (const auto& bell : {states::psi_plus(), states::psi_minus(), states::psi(1, 0.7)})
    CHECK_THAT(log_negativity(DensityMatrix(bell)), WithinAbs(1.0, 1e-12));
  CHECK_THAT(log_negativity(DensityMatrix::basis(2, 0)), WithinAbs(0.0, 1e-12));
  CHECK_THAT(log_negativity(DensityMatrix::maximally_mixed(2)), WithinAbs(0.0, 1e-12));

  const auto raw = raw_state(pi / 6, Sign::plus, 0.0);
  const double expect = oracle::log_negativity(oracle::to_array(raw.matrix()));
  CHECK_THAT(log_negativity(raw), WithinAbs(expect, 1e-10));
  // Closed form: the partial transpose has one negative eigenvalue
  // (s^2 - sqrt(s^4 + c^4)) / 2.
  const double s2 = 0.25, c2 = 0.75;
  const double closed = std::log2(1 + std::sqrt(s2 * s2 + c2 * c2) - s2);
  CHECK_THAT(log_negativity(raw), WithinAbs(closed, 1e-12));
}

TEST_CASE("log_negativity matches a brute-force partial transpose") {
  RandomStream rng(52);
  for (int k = 0; k < 100; ++k) {
    const auto rho = k % 2 ? states::random_mixed(2, rng) : DensityMatrix(states::random_pure(2, rng));
    CHECK_THAT(log_negativity(rho), WithinAbs(oracle::log_negativity(oracle::to_array(rho.matrix())), 1e-10));
  }
}

TEST_CASE("log_negativity is invariant under local unitaries") {
  RandomStream rng(53);
  for (int k = 0; k < 50; ++k) {
    const auto rho = states::random_mixed(2, rng);
    const auto out = apply_gate(apply_gate(rho, random_unitary(rng), {0}), random_unitary(rng), {1});
    CHECK_THAT(log_negativity(out), WithinAbs(log_negativity(rho), 1e-9));
  }
}

TEST_CASE("ebit rate of ideal one-attempt heralds is nu") {
  const double elapsed = 2 * 6e-6 + 500e-6;
  std::vector<TrialRecord> trials;
  for (int i = 0; i < 10; ++i) trials.push_back(heralded_record(to_memory_frame(DensityMatrix(states::psi_plus())), elapsed));
  const auto mean = mean_aligned_state(trials);
  REQUIRE(mean);
  CHECK(mean->max_abs_diff(DensityMatrix(states::psi_plus())) < 1e-14);
  RandomStream rng(54);
  const auto r = ebit_rate(trials, *mean, rng, 200);
  REQUIRE(r);
  CHECK_THAT(r->nu, WithinRel(1.0 / elapsed, 1e-12));
  CHECK_THAT(r->e_n, WithinAbs(1.0, 1e-12));
  CHECK_THAT(r->r, WithinRel(r->nu, 1e-12));
  CHECK(r->e_n_stderr < 1e-12);
}

TEST_CASE("ebit rate is undefined without heralds") {
  TrialRecord t;
  t.elapsed_time = 1e-3;
  std::vector<TrialRecord> trials{t, t};
  RandomStream rng(55);
  CHECK_FALSE(mean_aligned_state(trials).has_value());
  CHECK_FALSE(ebit_rate(trials, DensityMatrix::maximally_mixed(2), rng).has_value());
  CHECK_THROWS(ebit_rate(std::span<const TrialRecord>{}, DensityMatrix::maximally_mixed(2), rng));
}

TEST_CASE("ebit rate obeys r = nu * E_N and scales with attempt duration") {
  ProtocolConfig cfg;
  cfg.p_det = 0.02;
  cfg.n1_max = 200;
  cfg.n2_max = 30;
  cfg.local_ops_duration = 0.0;
  auto fast = cfg;
  fast.attempt_duration = cfg.attempt_duration / 2;
  const auto slow_trials = run_trials(cfg, 20000, 7, 1, TrialSampling::unconditioned, 1);
  const auto fast_trials = run_trials(fast, 20000, 7, 1, TrialSampling::unconditioned, 1);
  const auto mean = mean_aligned_state(slow_trials);
  REQUIRE(mean);
  RandomStream r1(56), r2(56);
  const auto slow = ebit_rate(slow_trials, *mean, r1, 200);
  const auto quick = ebit_rate(fast_trials, *mean_aligned_state(fast_trials), r2, 200);
  REQUIRE(slow);
  REQUIRE(quick);
  CHECK(slow->nu >= 0);
  CHECK(slow->e_n >= 0);
  CHECK(std::abs(slow->r - slow->nu * slow->e_n) <= 1e-12 * std::abs(slow->r));
  CHECK(quick->nu == 2 * slow->nu);
  CHECK(quick->r == 2 * slow->r);
  CHECK(slow->nu_stderr > 0);
  CHECK(slow->e_n_stderr > 0);
}

TEST_CASE("heralded rate matches the truncated-geometric expected-time oracle") {
  // Ideal noise, so the herald probability of a completed run is cos^4(theta)/2.
  auto cfg = ProtocolConfig::ideal(pi / 6);
  cfg.p_det = 1e-3;
  cfg.n1_max = 1000;
  cfg.n2_max = 50;
  const double p = cfg.success_probability();
  const double tau = cfg.attempt_duration, t_loc = cfg.local_ops_duration;
  const double p1 = -std::expm1(static_cast<double>(cfg.n1_max) * std::log1p(-p));
  const double p3 = -std::expm1(static_cast<double>(cfg.n2_max) * std::log1p(-p));
  // E[min(N, cap)] = P(N <= cap) / p for a geometric N.
  const double expected_time = tau * p1 / p + p1 * (tau * p3 / p + p3 * t_loc);
  const double herald = 9.0 / 32;
  const double nu_oracle = p1 * p3 * herald / expected_time;

  const auto trials = run_trials(cfg, 1'000'000, 3, 2, TrialSampling::unconditioned, 0);
  const auto mean = mean_aligned_state(trials);
  REQUIRE(mean);
  RandomStream rng(57);
  const auto est = ebit_rate(trials, *mean, rng, 100);
  REQUIRE(est);
  INFO("nu = " << est->nu << " +- " << est->nu_stderr << ", oracle " << nu_oracle);
  CHECK(std::abs(est->nu - nu_oracle) < 3 * est->nu_stderr);

  // Same oracle without the herald factor for the both-generated event rate.
  const auto ev = estimate_event_rate(cfg, 1'000'000, 3, 4);
  INFO("event rate = " << ev.rate << " +- " << ev.stderr_ << ", oracle " << p1 * p3 / expected_time);
  CHECK(std::abs(ev.rate - p1 * p3 / expected_time) < 3 * ev.stderr_);
}

TEST_CASE("Barrett-Kok baseline") {
  const auto top = barrett_kok_rate(1.0, 1.0, 6e-6);
  CHECK(top.per_round_success == 0.5);
  CHECK_THAT(top.rate.e_n, WithinAbs(1.0, 1e-12));
  CHECK_THAT(top.rate.nu, WithinRel(0.5 / 12e-6, 1e-12));

  const auto lo = barrett_kok_rate(1e-3, 1.0, 6e-6);
  const auto hi = barrett_kok_rate(1e-2, 1.0, 6e-6);
  CHECK_THAT(hi.rate.nu / lo.rate.nu, WithinRel(100.0, 1e-12));

  const auto vis = barrett_kok_rate(1e-3, 0.73, 6e-6);
  CHECK_THAT(vis.rate.e_n, WithinAbs(std::log2(1.73), 1e-12));
  CHECK_THAT(vis.rate.r, WithinRel(vis.rate.nu * vis.rate.e_n, 1e-12));
  CHECK_THROWS(barrett_kok_rate(0.0, 1.0, 6e-6));
}

TEST_CASE("correlator sampling") {
  RandomStream rng(58);
  const auto rho = raw_state(pi / 5, Sign::plus, 0.4, 0.73);
  const auto exact = correlators(rho);

  const auto analytic = tomography_sample(rho, 400, rng, true);
  CHECK(analytic.value.xx == exact.xx);
  CHECK(analytic.value.yy == exact.yy);
  CHECK(analytic.value.zz == exact.zz);

  CHECK_THAT(correlator_stderr(0.0, 400), WithinAbs(0.05, 1e-15));
  CHECK(correlator_stderr(1.0, 400) == 0.0);

  const int reps = 300;
  double sum = 0;
  for (int i = 0; i < reps; ++i) sum += tomography_sample(rho, 10000, rng).value.zz;
  const double se = std::sqrt((1 - exact.zz * exact.zz) / (10000.0 * reps));
  CHECK(std::abs(sum / reps - exact.zz) < 3 * se);
}

TEST_CASE("attempt binning") {
  const auto bell = to_memory_frame(DensityMatrix(states::psi_plus()));
  SECTION("all trials at n2 = 1 land in one bin") {
    std::vector<TrialRecord> trials(5, heralded_record(bell, 1e-3, 1));
    const auto curve = bin_by_attempts(trials, 5, 50);
    REQUIRE(curve.bins.size() == 10);
    CHECK(curve.bins[0].count == 5);
    for (std::size_t i = 1; i < curve.bins.size(); ++i) {
      CHECK(curve.bins[i].count == 0);
      CHECK_FALSE(curve.bins[i].fidelity.has_value());
    }
    CHECK_THAT(*curve.bins[0].fidelity, WithinAbs(1.0, 1e-12));
  }
  SECTION("bins are disjoint, ordered and count every heralded trial") {
    ProtocolConfig cfg;
    cfg.n2_max = 47;
    const auto trials = run_trials(cfg, 3000, 9, 3, TrialSampling::completed_only, 1);
    const auto curve = bin_by_attempts(trials, 5, cfg.n2_max);
    std::size_t heralded = 0;
    for (const auto& t : trials) heralded += t.heralded;
    CHECK(curve.total() == heralded);
    CHECK(curve.bins.front().lo == 1);
    CHECK(curve.bins.back().hi == 47);
    for (std::size_t i = 1; i < curve.bins.size(); ++i) CHECK(curve.bins[i].lo == curve.bins[i - 1].hi + 1);
  }
  SECTION("no heralds is an error") {
    std::vector<TrialRecord> trials(3);
    CHECK_THROWS(bin_by_attempts(trials, 5, 50));
  }
}

TEST_CASE("decay fit recovers a synthetic time constant") {
  BinnedCurve curve;
  for (long long lo = 1; lo <= 200; lo += 10) {
    Bin b;
    b.lo = lo;
    b.hi = lo + 9;
    b.count = 100;
    b.fidelity = 0.5 + 0.4 * std::exp(-b.center() / 80.0);
    curve.bins.push_back(b);
  }
  const auto fit = fit_fidelity_decay(curve);
  CHECK_THAT(fit.tau, WithinRel(80.0, 1e-6));
  CHECK_THAT(fit.amplitude, WithinRel(0.4, 1e-6));
}
