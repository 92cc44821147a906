#include <cmath>
#include <numbers>

#include "catch_amalgamated.hpp"

#include "distill/channels.hpp"
#include "distill/protocol.hpp"

using namespace distill;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("dephasing channel examples") {
  const DensityMatrix plus(states::plus_x());
  CHECK(dephase(plus, 0.0, 0).max_abs_diff(plus) == 0.0);
  CHECK(dephase(plus, 1.0, 0).max_abs_diff(DensityMatrix::maximally_mixed(1)) < 1e-15);
  CHECK_THAT(pauli_expectation(dephase(plus, 0.5, 0), "X"), WithinAbs(0.5, 1e-15));
  CHECK_THROWS_AS(dephasing_channel(1.5), InvariantError);
  CHECK_THROWS_AS(dephase(plus, -0.1, 0), InvariantError);
}

TEST_CASE("direct appliers agree with the Kraus sets") {
  RandomStream rng(31);
  for (int k = 0; k < 10; ++k) {
    const auto rho = states::random_mixed(3, rng);
    const double lambda = rng.uniform();
    const auto ks = dephasing_channel(lambda);
    CHECK(dephase(rho, lambda, 1).max_abs_diff(apply_kraus(rho, ks, {1})) < 1e-14);
    const double p = rng.uniform();
    const auto dep = depolarizing_channel(p, 2);
    CHECK(depolarize(rho, p, {2, 0}).max_abs_diff(apply_kraus(rho, dep, {2, 0})) < 1e-14);
    const auto dep1 = depolarizing_channel(p, 1);
    CHECK(depolarize(rho, p, {1}).max_abs_diff(apply_kraus(rho, dep1, {1})) < 1e-14);
  }
}

TEST_CASE("every Kraus set is complete") {
  for (double x : {0.0, 0.013, 0.5, 0.97, 1.0}) {
    CHECK(kraus_completeness_error(dephasing_channel(x)) < 1e-9);
    CHECK(kraus_completeness_error(depolarizing_channel(x, 1)) < 1e-9);
    CHECK(kraus_completeness_error(depolarizing_channel(x, 2)) < 1e-9);
  }
}

TEST_CASE("depolarizing examples") {
  RandomStream rng(32);
  const auto rho = states::random_mixed(2, rng);
  CHECK(depolarize(rho, 0.0, {0, 1}).max_abs_diff(rho) < 1e-15);
  CHECK(depolarize(rho, 1.0, {0, 1}).max_abs_diff(DensityMatrix::maximally_mixed(2)) < 1e-15);
  const double p = 0.3;
  const auto expect = mix(rho, DensityMatrix::maximally_mixed(2), 1 - p);
  CHECK(depolarize(rho, p, {0, 1}).max_abs_diff(expect) < 1e-15);
}

TEST_CASE("two-qubit depolarizing at 0.0533 gives Bell fidelity 0.96") {
  // (1 - p) + p / 4 = 0.96
  const double p = (1.0 - 0.96) * 4.0 / 3.0;
  CHECK_THAT(p, WithinAbs(0.053333333333, 1e-12));
  const auto out = depolarize(DensityMatrix(states::psi_plus()), p, {0, 1});
  CHECK_THAT(fidelity_with_pure(out, states::psi_plus()), WithinAbs(0.96, 1e-14));
}

TEST_CASE("memory storage decay examples") {
  NodeNoiseParams node;
  node.memory_one_over_e_attempts = 273;
  node.decay_exponent = 1;
  CHECK(memory_storage_decay(0, node) == 0.0);

  // Superposition fidelity after 273 attempts.
  const auto stored = dephase(DensityMatrix(states::plus_x()), memory_storage_decay(273, node), 0);
  CHECK_THAT(fidelity_with_pure(stored, states::plus_x()), WithinAbs(0.5 * (1 + std::exp(-1.0)), 1e-14));
  CHECK_THAT(fidelity_with_pure(stored, states::plus_x()), WithinAbs(0.684, 5e-4));

  CHECK_THAT(memory_storage_decay(100, node), WithinAbs(1.0 - std::exp(-100.0 / 273.0), 1e-15));
  CHECK_THROWS(memory_storage_decay(-1, node));
}

TEST_CASE("single-attempt dephasing composes to the attempt-count law") {
  NodeNoiseParams node;
  node.memory_one_over_e_attempts = 273;
  node.decay_exponent = 1;
  RandomStream rng(33);
  const auto rho0 = states::random_mixed(1, rng);
  auto rho = rho0;
  const double step = memory_storage_decay(1, node);
  for (int k = 0; k < 100; ++k) rho = apply_kraus(rho, dephasing_channel(step), {0});
  CHECK(rho.max_abs_diff(dephase(rho0, memory_storage_decay(100, node), 0)) < 1e-10);
}

TEST_CASE("storage decay is monotone and saturates") {
  for (double beta : {0.5, 1.0, 2.0}) {
    NodeNoiseParams node;
    node.decay_exponent = beta;
    double prev = 0;
    for (long long n = 1; n <= 3000; ++n) {
      const double l = memory_storage_decay(n, node);
      CHECK(l >= prev);
      prev = l;
    }
    CHECK(memory_storage_decay(1'000'000, node) > 1 - 1e-12);
  }
  NodeNoiseParams ideal;
  ideal.memory_one_over_e_attempts = std::numeric_limits<double>::infinity();
  CHECK(memory_storage_decay(1'000'000, ideal) == 0.0);
}

TEST_CASE("dephasing leaves Z populations untouched") {
  RandomStream rng(34);
  for (int k = 0; k < 10; ++k) {
    const auto rho = states::random_mixed(2, rng);
    const auto out = dephase(rho, rng.uniform(), 0);
    CHECK_THAT(pauli_expectation(out, "ZI"), WithinAbs(pauli_expectation(rho, "ZI"), 1e-14));
    CHECK_THAT(pauli_expectation(out, "ZZ"), WithinAbs(pauli_expectation(rho, "ZZ"), 1e-14));
  }
}

TEST_CASE("wall-time dephasing is Gaussian in t / T2*") {
  NodeNoiseParams node;
  node.t2_star = 3.4e-3;
  CHECK(wall_time_dephasing(0.0, node) == 0.0);
  CHECK_THAT(wall_time_dephasing(3.4e-3, node), WithinAbs(1 - std::exp(-1.0), 1e-15));
}

TEST_CASE("readout error examples") {
  RandomStream rng(35);
  NodeNoiseParams perfect;
  for (int i = 0; i < 1000; ++i) {
    CHECK(readout_error(0, perfect, rng) == 0);
    CHECK(readout_error(1, perfect, rng) == 1);
  }

  NodeNoiseParams coin;
  coin.readout_fid_0 = coin.readout_fid_1 = 0.5;
  const int n = 100000;
  int ones_from_0 = 0, ones_from_1 = 0;
  for (int i = 0; i < n; ++i) {
    ones_from_0 += readout_error(0, coin, rng);
    ones_from_1 += readout_error(1, coin, rng);
  }
  const double sd = std::sqrt(n * 0.25);
  CHECK(std::abs(ones_from_0 - n / 2.0) < 3 * sd);
  CHECK(std::abs(ones_from_1 - n / 2.0) < 3 * sd);

  NodeNoiseParams skew;
  skew.readout_fid_0 = 0.9;
  skew.readout_fid_1 = 0.8;
  int flips0 = 0, flips1 = 0;
  for (int i = 0; i < n; ++i) {
    flips0 += readout_error(0, skew, rng) != 0;
    flips1 += readout_error(1, skew, rng) != 1;
  }
  CHECK(std::abs(flips0 - 0.1 * n) < 3 * std::sqrt(n * 0.1 * 0.9));
  CHECK(std::abs(flips1 - 0.2 * n) < 3 * std::sqrt(n * 0.2 * 0.8));
}

TEST_CASE("raw-state coherence factor") {
  RandomStream rng(36);
  PhotonicNoiseParams ideal{1.0, 0.0, 0.0, CoherenceScaling::linear};
  const auto f = raw_state_coherence_factor(ideal, rng);
  CHECK(f.magnitude == 1.0);
  CHECK(f.phase_jitter == 0.0);

  PhotonicNoiseParams measured{0.73, 0.0, 0.0, CoherenceScaling::linear};
  CHECK(raw_state_coherence_factor(measured, rng).magnitude == 0.73);
  const auto rho = raw_state(std::numbers::pi / 6, Sign::plus, 0.0, 0.73);
  const auto ref = raw_state(std::numbers::pi / 6, Sign::plus, 0.0, 1.0);
  CHECK_THAT(std::abs(rho(1, 2)), WithinAbs(0.73 * std::abs(ref(1, 2)), 1e-15));
  CHECK(rho(1, 1) == ref(1, 1));

  measured.coherence_scaling = CoherenceScaling::sqrt;
  CHECK_THAT(raw_state_coherence_factor(measured, rng).magnitude, WithinAbs(std::sqrt(0.73), 1e-15));

  PhotonicNoiseParams drift{1.0, 0.0, 0.3, CoherenceScaling::linear};
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double j = raw_state_coherence_factor(drift, rng).phase_jitter;
    s += j;
    s2 += j * j;
  }
  const double mean = s / n;
  const double sd = std::sqrt(s2 / n - mean * mean);
  CHECK(std::abs(mean) < 3 * 0.3 / std::sqrt(n));
  // The sample sd of a normal has stderr sigma / sqrt(2n).
  CHECK(std::abs(sd - 0.3) < 3 * 0.3 / std::sqrt(2.0 * n));
}

TEST_CASE("noise parameter validation") {
  PhotonicNoiseParams p;
  p.visibility = 1.5;
  CHECK_THROWS_AS(p.validate(), InvariantError);
  p.visibility = 0.73;
  p.dark_count_fraction = 1.0;
  CHECK_THROWS_AS(p.validate(), InvariantError);

  NodeNoiseParams n;
  n.readout_fid_1 = 1.01;
  CHECK_THROWS_AS(n.validate(), InvariantError);
  n.readout_fid_1 = 1.0;
  n.memory_one_over_e_attempts = 0;
  CHECK_THROWS_AS(n.validate(), InvariantError);
}
