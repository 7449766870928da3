#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "ecsim/schemes.hpp"

using namespace ecsim;
using Catch::Approx;

namespace {

const SchemeParams kRef{1.0, 0.1, 0.5, 0.5};

// Eigenvalues of a dyad-sum operator in the (non-orthogonal) coherent basis of
// its labels: with Gram G = T^dagger T and coefficient matrix C, the operator's
// matrix in an orthonormal basis is T C T^dagger with T = D^{1/2} V^dagger.
Eigen::VectorXd operator_spectrum(const CoherentOperator& rho) {
  auto canon = canonicalized(rho);
  std::vector<CoherentLabel> labels;
  auto index_of = [&](const CoherentLabel& l) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels_near_equal(labels[i], l, 1e-12)) return i;
    labels.push_back(l);
    return labels.size() - 1;
  };
  std::vector<std::array<std::size_t, 2>> pairs;
  for (const auto& t : canon.terms())
    pairs.push_back({index_of(t.ket), index_of(t.bra)});

  const long n = static_cast<long>(labels.size());
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    c(static_cast<long>(pairs[k][0]), static_cast<long>(pairs[k][1])) +=
        canon.terms()[k].coeff;

  Eigen::MatrixXcd g(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      g(i, j) = overlap(labels[static_cast<std::size_t>(i)],
                        labels[static_cast<std::size_t>(j)]);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> gs(g);
  const Eigen::VectorXcd dsqrt =
      gs.eigenvalues().cwiseMax(0.0).cwiseSqrt().cast<Complex>();
  Eigen::MatrixXcd t = dsqrt.asDiagonal() * gs.eigenvectors().adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ms(t * c * t.adjoint());
  return ms.eigenvalues();
}

int spectral_rank(const Eigen::VectorXd& eigs, double tol) {
  int r = 0;
  for (long i = 0; i < eigs.size(); ++i)
    if (std::abs(eigs(i)) > tol) ++r;
  return r;
}

}  // namespace

TEST_CASE("parameter validation", "[schemes]") {
  CHECK_NOTHROW(validate_params(kRef));
  CHECK_NOTHROW(validate_params({1.0, 0.1, 0.0, 1.0}));
  CHECK_THROWS_AS(validate_params({0.0, 0.1, 0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(validate_params({-1.0, 0.1, 0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(validate_params({1.0, 0.0, 0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(validate_params({1.0, 1.0, 0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(validate_params({1.0, 0.1, 1.0, 0.5}), DomainError);
  CHECK_THROWS_AS(validate_params({1.0, 0.1, -0.1, 0.5}), DomainError);
  CHECK_THROWS_AS(validate_params({1.0, 0.1, 0.5, 1.5}), DomainError);
  CHECK_THROWS_AS(validate_params({1.0, 0.1, 0.5, -0.5}), DomainError);
}

TEST_CASE("channel loss accounting", "[schemes]") {
  CHECK(eta_one_sided(0.5) == Approx(0.2928932188134524).epsilon(1e-14));
  for (double eta_t : {0.0, 0.3, 0.75}) {
    CHECK(eta_total_from_one_sided(eta_one_sided(eta_t)) ==
          Approx(eta_t).margin(1e-14));
  }
  CHECK(eta_one_sided(0.0) == 0.0);
}

TEST_CASE("derived parameters per formula variant", "[schemes]") {
  auto da = derive_params(kRef, FormulaVariant::appendix);
  CHECK(da.epsilon_prime == Approx(0.1111111111111111).epsilon(1e-14));
  CHECK(da.alpha_prime == Approx(1.0540925533894598).epsilon(1e-14));
  CHECK(da.eta_one_sided == Approx(0.2928932188134524).epsilon(1e-14));
  CHECK(da.eta_prime == Approx(0.6464466094067263).epsilon(1e-14));
  CHECK(da.rho == Approx(0.05555555555555556).epsilon(1e-14));
  CHECK(da.gamma == Approx(0.20987654320987656).epsilon(1e-14));
  CHECK(da.alpha_double_prime == Approx(std::sqrt(da.rho)).epsilon(1e-14));

  auto dm = derive_params(kRef, FormulaVariant::main_text);
  CHECK(dm.epsilon_prime == Approx(0.09090909090909091).epsilon(1e-14));
  CHECK(dm.eta_prime == Approx(0.7705980500730985).epsilon(1e-14));

  auto dj = derive_params(kRef, FormulaVariant::adjudicated);
  CHECK(dj.epsilon_prime == da.epsilon_prime);
  CHECK(dj.eta_prime == da.eta_prime);

  SECTION("tap ratio above one is rejected") {
    CHECK_THROWS_AS(derive_params({1.0, 0.8, 0.0, 0.0}, FormulaVariant::appendix),
                    DomainError);
  }
}

TEST_CASE("closed-form reference values", "[schemes]") {
  SECTION("adjudicated variant") {
    auto e = original_closed_form(kRef, ParityOutcome::even_nonzero);
    auto o = original_closed_form(kRef, ParityOutcome::odd);
    auto n = new_closed_form(kRef);
    CHECK(e.fidelity == Approx(0.8790881498526404).epsilon(1e-12));
    CHECK(e.probability == Approx(0.0023556804762729492).epsilon(1e-12));
    CHECK(o.fidelity == Approx(0.8710812234270086).epsilon(1e-12));
    CHECK(o.probability == Approx(0.058370100338271357).epsilon(1e-12));
    CHECK(n.fidelity == Approx(0.9492150437289827).epsilon(1e-12));
    CHECK(n.probability == Approx(0.0010406407492225846).epsilon(1e-12));
  }

  SECTION("main-text variant") {
    auto e = original_closed_form(kRef, ParityOutcome::even_nonzero,
                                  FormulaVariant::main_text);
    auto o = original_closed_form(kRef, ParityOutcome::odd,
                                  FormulaVariant::main_text);
    auto n = new_closed_form(kRef, FormulaVariant::main_text);
    CHECK(e.fidelity == Approx(0.881685128564412).epsilon(1e-12));
    CHECK(e.probability == Approx(0.0008264968369682516).epsilon(1e-12));
    CHECK(o.fidelity == Approx(0.8738254937802608).epsilon(1e-12));
    CHECK(o.probability == Approx(0.03228230484485142).epsilon(1e-12));
    CHECK(n.fidelity == Approx(0.9548354343410469).epsilon(1e-12));
    CHECK(n.probability == Approx(1.4556515812204121e-05).epsilon(1e-12));
  }

  SECTION("adjudicated equals appendix") {
    for (double a : {0.3, 1.0, 2.2}) {
      SchemeParams p{a, 0.15, 0.4, 0.25};
      auto x = original_closed_form(p, ParityOutcome::odd);
      auto y = original_closed_form(p, ParityOutcome::odd, FormulaVariant::appendix);
      CHECK(x.fidelity == y.fidelity);
      CHECK(x.probability == y.probability);
      CHECK(new_closed_form(p).fidelity ==
            new_closed_form(p, FormulaVariant::appendix).fidelity);
    }
  }
}

TEST_CASE("original scheme network amplitude table", "[schemes]") {
  auto d = derive_params(kRef);
  auto net = original_scheme_network(kRef);
  const double a = kRef.alpha;
  const double bright =
      std::sqrt(2.0 * d.epsilon_prime * (1.0 - d.eta_one_sided) *
                (1.0 - kRef.detector_loss)) * a;
  const double env_ch = std::sqrt(d.epsilon_prime * d.eta_one_sided) * a;
  const double env_det = std::sqrt(2.0 * d.epsilon_prime * (1.0 - d.eta_one_sided) *
                                   kRef.detector_loss) * a;

  SECTION("same-sign branch lights detector 1 only") {
    auto out = net.apply(CoherentLabel{d.alpha_prime, 0.0, d.alpha_prime, 0.0});
    CHECK(std::abs(out[orig_modes::kept_a] - Complex(a, 0.0)) < 1e-14);
    CHECK(std::abs(out[orig_modes::kept_b] - Complex(a, 0.0)) < 1e-14);
    CHECK(std::abs(out[orig_modes::detector_1] - Complex(bright, 0.0)) < 1e-14);
    CHECK(std::abs(out[orig_modes::detector_2]) < 1e-14);
    CHECK(std::abs(out[orig_modes::channel_env_a] - Complex(env_ch, 0.0)) < 1e-14);
    CHECK(std::abs(out[orig_modes::channel_env_b] - Complex(env_ch, 0.0)) < 1e-14);
    CHECK(std::abs(out[orig_modes::detector_env_1] - Complex(env_det, 0.0)) < 1e-14);
    CHECK(std::abs(out[orig_modes::detector_env_2]) < 1e-14);
  }

  SECTION("mixed-sign branch lights detector 2 only") {
    auto out = net.apply(CoherentLabel{d.alpha_prime, 0.0, -d.alpha_prime, 0.0});
    CHECK(std::abs(out[orig_modes::kept_a] - Complex(a, 0.0)) < 1e-14);
    CHECK(std::abs(out[orig_modes::kept_b] - Complex(-a, 0.0)) < 1e-14);
    CHECK(std::abs(out[orig_modes::detector_1]) < 1e-14);
    CHECK(std::abs(out[orig_modes::detector_2] - Complex(-bright, 0.0)) < 1e-14);
  }
}

TEST_CASE("new scheme network amplitude table", "[schemes]") {
  auto d = derive_params(kRef);
  auto net = new_scheme_network(kRef, d);
  const double a = kRef.alpha;
  const double bb = std::sqrt(1.0 - d.rho) * a;
  const double anc = std::sqrt(d.gamma) * a;

  SECTION("same-sign branches recombine exactly and split the ancilla") {
    for (double s : {1.0, -1.0}) {
      auto out = net.apply(CoherentLabel{s * d.alpha_prime, 0.0, s * bb, anc});
      CHECK(std::abs(out[new_modes::kept_a] - Complex(s * a, 0.0)) < 1e-14);
      CHECK(std::abs(out[new_modes::kept_b] - Complex(s * a, 0.0)) < 1e-14);
      CHECK(std::abs(out[new_modes::detector_1] - Complex(anc / std::sqrt(2.0), 0.0)) < 1e-14);
      CHECK(std::abs(out[new_modes::detector_2] - Complex(anc / std::sqrt(2.0), 0.0)) < 1e-14);
      CHECK(std::abs(out[new_modes::channel_env] -
                     Complex(s * std::sqrt(kRef.eta_total * d.epsilon_prime) * a, 0.0)) < 1e-14);
    }
  }

  SECTION("mixed-sign branches silence one detector") {
    auto pm = net.apply(CoherentLabel{d.alpha_prime, 0.0, -bb, anc});
    CHECK(std::abs(pm[new_modes::detector_1] -
                   Complex(std::sqrt(2.0 * d.gamma) * a, 0.0)) < 1e-14);
    CHECK(std::abs(pm[new_modes::detector_2]) < 1e-14);

    auto mp = net.apply(CoherentLabel{-d.alpha_prime, 0.0, bb, anc});
    CHECK(std::abs(mp[new_modes::detector_1]) < 1e-14);
    CHECK(std::abs(mp[new_modes::detector_2] -
                   Complex(std::sqrt(2.0 * d.gamma) * a, 0.0)) < 1e-14);
  }
}

TEST_CASE("original scheme engine agrees with the closed forms", "[schemes]") {
  const std::vector<SchemeParams> points{
      kRef, {0.5, 0.2, 0.8, 0.9}, {2.0, 0.05, 0.2, 0.0}};
  for (const auto& p : points) {
    for (auto parity : {ParityOutcome::even_nonzero, ParityOutcome::odd}) {
      auto cf = original_closed_form(p, parity);
      auto sim = original_simulate(p, parity);
      INFO("alpha=" << p.alpha << " eps=" << p.epsilon << " etaT=" << p.eta_total
                    << " l=" << p.detector_loss
                    << " parity=" << (parity == ParityOutcome::odd ? "odd" : "even"));
      CHECK(sim.fidelity == Approx(cf.fidelity).margin(1e-10));
      CHECK(sim.probability == Approx(cf.probability).margin(1e-10));
      CHECK(sim.correction_applied);
    }
  }
}

TEST_CASE("original scheme conditional state structure", "[schemes]") {
  auto sim = original_simulate(kRef, ParityOutcome::even_nonzero);
  const auto& rho = sim.conditional_state;
  CHECK(rho.mode_count() == 2);
  CHECK(op_trace(rho) == Approx(1.0).epsilon(1e-12));
  CHECK(hermiticity_defect(rho) < 1e-12);

  auto eigs = operator_spectrum(rho);
  CHECK(eigs.minCoeff() > -1e-10);
  CHECK(spectral_rank(eigs, 1e-10) == 2);
  CHECK(eigs.sum() == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("herald cutoff control", "[schemes]") {
  SECTION("a cutoff failing the tail bound is rejected") {
    CHECK_THROWS_AS(original_simulate(kRef, ParityOutcome::even_nonzero, 1),
                    TailBoundError);
  }

  SECTION("a generous explicit cutoff matches the automatic one") {
    for (auto parity : {ParityOutcome::even_nonzero, ParityOutcome::odd}) {
      auto autod = original_simulate(kRef, parity);
      auto manual = original_simulate(kRef, parity, 60);
      CHECK(manual.fidelity == Approx(autod.fidelity).margin(1e-13));
      CHECK(manual.probability == Approx(autod.probability).margin(1e-13));
    }
  }

  SECTION("tail bound helper is monotone and rigorous") {
    const double mu = 0.7;
    double prev = 1.0;
    for (int n = 2; n <= 12; ++n) {
      double b = detail::herald_tail_bound(mu, n);
      CHECK(b < prev);
      prev = b;
    }
    auto cut = detail::herald_cutoff_for(mu, 1e-16, 4);
    CHECK(detail::herald_tail_bound(mu, cut.n_max) < 1e-16);
  }
}

TEST_CASE("herald classes of the original scheme are exhaustive", "[schemes]") {
  auto d = derive_params(kRef);
  auto net = original_scheme_network(kRef);
  auto rho = from_ket(apply_network(original_input_ket(kRef, d), net));
  for (std::size_t m : {std::size_t{7}, std::size_t{6}, std::size_t{5}, std::size_t{4}})
    rho = trace_out(rho, m);
  const double p_silent = op_trace(project_fock(project_fock(rho, 3, 0), 1, 0));

  auto even = original_simulate(kRef, ParityOutcome::even_nonzero);
  auto odd = original_simulate(kRef, ParityOutcome::odd);
  CHECK(even.probability + odd.probability + p_silent == Approx(1.0).margin(1e-10));
}

TEST_CASE("new scheme engine agrees with the closed form", "[schemes]") {
  const std::vector<SchemeParams> points{
      kRef, {0.5, 0.2, 0.8, 0.9}, {2.0, 0.05, 0.2, 0.0}};
  for (const auto& p : points) {
    auto cf = new_closed_form(p);
    auto sim = new_simulate(p);
    INFO("alpha=" << p.alpha << " eps=" << p.epsilon << " etaT=" << p.eta_total
                  << " l=" << p.detector_loss);
    CHECK(sim.fidelity == Approx(cf.fidelity).margin(1e-10));
    CHECK(sim.probability == Approx(cf.probability).margin(1e-10));
    CHECK_FALSE(sim.correction_applied);
  }
}

TEST_CASE("new scheme fidelity ignores detector loss", "[schemes]") {
  SchemeParams base{1.0, 0.1, 0.5, 0.0};
  auto f0 = new_simulate(base).fidelity;
  double p_prev = new_simulate(base).probability;
  for (double l : {0.25, 0.5, 0.9}) {
    SchemeParams p = base;
    p.detector_loss = l;
    auto sim = new_simulate(p);
    CHECK(std::abs(sim.fidelity - f0) < 1e-12);
    CHECK(sim.probability < p_prev);
    p_prev = sim.probability;
  }

  SECTION("original scheme fidelity does degrade with detector loss") {
    double prev = 2.0;
    for (double l : {0.0, 0.3, 0.6, 0.9}) {
      SchemeParams p = kRef;
      p.detector_loss = l;
      double f = original_simulate(p, ParityOutcome::even_nonzero).fidelity;
      CHECK(f < prev - 1e-6);
      prev = f;
    }
  }

  SECTION("fully lossy detectors cannot herald") {
    SchemeParams p = kRef;
    p.detector_loss = 1.0;
    CHECK(new_closed_form(p).probability == 0.0);
    CHECK_THROWS_AS(new_simulate(p), DegenerateConditioningError);
  }
}

TEST_CASE("new scheme conditional state structure", "[schemes]") {
  auto sim = new_simulate(kRef);
  const auto& rho = sim.conditional_state;
  CHECK(rho.mode_count() == 2);
  CHECK(op_trace(rho) == Approx(1.0).epsilon(1e-12));
  CHECK(hermiticity_defect(rho) < 1e-12);

  auto eigs = operator_spectrum(rho);
  CHECK(eigs.minCoeff() > -1e-10);
  CHECK(spectral_rank(eigs, 1e-10) == 2);
}

TEST_CASE("state discrimination outcome distribution", "[schemes]") {
  for (double alpha : {0.3, 1.0, 2.0}) {
    for (double l : {0.0, 0.5}) {
      const double fail_expected = std::exp(-2.0 * (1.0 - l) * alpha * alpha);
      auto plus = usd_measure(alpha, l, NormSign::plus);
      CHECK(plus.detector_2 == Approx(0.0).margin(1e-14));
      CHECK(plus.detector_1 == Approx(1.0 - fail_expected).epsilon(1e-12));
      CHECK(plus.failure == Approx(fail_expected).epsilon(1e-12));
      CHECK(plus.detector_1 + plus.detector_2 + plus.failure ==
            Approx(1.0).margin(1e-13));

      auto minus = usd_measure(alpha, l, NormSign::minus);
      CHECK(minus.detector_1 == Approx(0.0).margin(1e-14));
      CHECK(minus.detector_2 == Approx(1.0 - fail_expected).epsilon(1e-12));
    }
  }

  SECTION("dead detectors always fail") {
    auto r = usd_measure(1.0, 1.0, NormSign::plus);
    CHECK(r.failure == Approx(1.0).epsilon(1e-14));
    CHECK(r.detector_1 == Approx(0.0).margin(1e-15));
  }
}

TEST_CASE("randomized engine and closed-form agreement", "[schemes][random]") {
  std::mt19937_64 rng(987654321);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    SchemeParams p{};
    p.alpha = 0.1 + 2.4 * u(rng);
    p.epsilon = 0.3 * (1.0 - u(rng)) + 1e-9;
    p.eta_total = 0.9 * u(rng);
    p.detector_loss = 0.9 * u(rng);
    INFO("draw " << i << ": alpha=" << p.alpha << " eps=" << p.epsilon
                 << " etaT=" << p.eta_total << " l=" << p.detector_loss);

    auto fe = original_closed_form(p, ParityOutcome::even_nonzero);
    auto fo = original_closed_form(p, ParityOutcome::odd);
    auto fn = new_closed_form(p);
    for (auto r : {fe, fo, fn}) {
      CHECK(r.fidelity > 0.0);
      CHECK(r.fidelity <= 1.0 + 1e-12);
      CHECK(r.probability > 0.0);
      CHECK(r.probability <= 1.0);
    }

    auto se = original_simulate(p, ParityOutcome::even_nonzero);
    auto so = original_simulate(p, ParityOutcome::odd);
    auto sn = new_simulate(p);
    CHECK(std::abs(se.fidelity - fe.fidelity) < 1e-9);
    CHECK(std::abs(se.probability - fe.probability) < 1e-9);
    CHECK(std::abs(so.fidelity - fo.fidelity) < 1e-9);
    CHECK(std::abs(so.probability - fo.probability) < 1e-9);
    CHECK(std::abs(sn.fidelity - fn.fidelity) < 1e-9);
    CHECK(std::abs(sn.probability - fn.probability) < 1e-9);
  }
}
