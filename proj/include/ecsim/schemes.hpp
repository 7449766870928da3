#pragma once

// The two heralded entanglement-distribution schemes and their closed-form
// fidelity/probability expressions.
//
// Original scheme: each party taps a fraction of a local even superposition
// into the channel; the two channel beams suffer transmission loss, interfere on
// a balanced beamsplitter, and a photon-number-resolved herald (n > 0 on exactly
// one detector, with detector loss modeled as a beamsplitter in front of an
// ideal counter) projects the retained modes onto an even (n even) or odd
// (n odd) entangled superposition. A herald on the far detector is folded in by
// the deterministic sign-flip correction on one retained mode.
//
// New scheme: party A taps as before; party B interferes a locally prepared
// superposition with an unambiguous-state-discrimination (USD) stage fed by an
// ancilla coherent beam, and success is a double click of two lossy threshold
// detectors. Detector loss only rescales the click probability, not the
// conditioned state.
//
// Two conventions for the closed forms are in circulation; they differ in the
// tap-strength reparameterization (epsilon' = eps/(1+eps) vs eps/(1-eps)), the
// composition of channel and detector loss, and the structure of the original
// scheme's probability prefactor. FormulaVariant::adjudicated resolves to the
// convention that agrees with the simulation engines (see run_validation), which
// is the `appendix` one throughout.

#include <cmath>
#include <cstddef>

#include "operator.hpp"

namespace ecsim {

struct SchemeParams {
    double alpha;         // local superposition amplitude, > 0
    double epsilon;       // tapped energy fraction, in (0, 1)
    double eta_total;     // end-to-end channel transmission loss, in [0, 1)
    double detector_loss; // detector inefficiency l, in [0, 1]
};

inline void validate_params(const SchemeParams& p) {
    if (!(std::isfinite(p.alpha) && p.alpha > 0.0))
        throw DomainError("SchemeParams: alpha must be positive");
    if (!(p.epsilon > 0.0 && p.epsilon < 1.0))
        throw DomainError("SchemeParams: epsilon must lie in (0, 1)");
    if (!(p.eta_total >= 0.0 && p.eta_total < 1.0))
        throw DomainError("SchemeParams: eta_total must lie in [0, 1)");
    if (!(p.detector_loss >= 0.0 && p.detector_loss <= 1.0))
        throw DomainError("SchemeParams: detector_loss must lie in [0, 1]");
}

// Loss of one channel arm when the quoted figure is the end-to-end loss of the
// full link: eta with (1 - eta)^2 = 1 - eta_total.
inline double eta_one_sided(double eta_total) {
    if (!(eta_total >= 0.0 && eta_total <= 1.0))
        throw DomainError("eta_one_sided: eta_total outside [0, 1]");
    return 1.0 - std::sqrt(1.0 - eta_total);
}

inline double eta_total_from_one_sided(double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta_total_from_one_sided: eta outside [0, 1]");
    return 1.0 - (1.0 - eta) * (1.0 - eta);
}

enum class FormulaVariant { main_text, appendix, adjudicated };

namespace detail {

// The individual convention choices behind the two variants, kept separate so
// the validation workflow can adjudicate each one in isolation.
enum class EpsConvention { ratio, reflectivity };        // eps/(1+eps) vs eps/(1-eps)
enum class EtaPrimeForm { amplitude, composed };         // sqrt(eta)+l-l*sqrt(eta) vs 1-(1-l)(1-eta)
enum class OrigProbForm { single_normalization, squared_normalization };
enum class NewFidForm { bare_epsilon, derived };
enum class NewProbForm { squared_gamma, derived };

inline FormulaVariant resolve(FormulaVariant v) {
    return v == FormulaVariant::adjudicated ? FormulaVariant::appendix : v;
}

inline EpsConvention eps_convention(FormulaVariant v) {
    return resolve(v) == FormulaVariant::main_text ? EpsConvention::ratio
                                                   : EpsConvention::reflectivity;
}

} // namespace detail

struct DerivedParams {
    double epsilon_prime;      // tap strength reparameterization
    double alpha_prime;        // source amplitude so the kept mode lands on alpha
    double eta_one_sided;      // per-arm channel loss
    double eta_prime;          // channel and detector loss seen by a tapped beam
    double rho;                // USD tap ratio of the new scheme
    double gamma;              // 4 rho (1 - rho)
    double alpha_double_prime; // sqrt(rho) alpha
};

namespace detail {

inline DerivedParams derive_params_slots(const SchemeParams& p, EpsConvention ec,
                                         EtaPrimeForm ef) {
    validate_params(p);
    DerivedParams d{};
    d.epsilon_prime = ec == EpsConvention::ratio ? p.epsilon / (1.0 + p.epsilon)
                                                 : p.epsilon / (1.0 - p.epsilon);
    d.alpha_prime = std::sqrt(1.0 + d.epsilon_prime) * p.alpha;
    d.eta_one_sided = ecsim::eta_one_sided(p.eta_total);
    const double eta = d.eta_one_sided, l = p.detector_loss;
    d.eta_prime = ef == EtaPrimeForm::amplitude
                      ? std::sqrt(eta) + l - l * std::sqrt(eta)
                      : 1.0 - (1.0 - l) * (1.0 - eta);
    d.rho = d.epsilon_prime * (1.0 - p.eta_total);
    if (d.rho > 1.0)
        throw DomainError("derive_params: USD tap ratio exceeds 1 for these parameters");
    d.gamma = 4.0 * d.rho * (1.0 - d.rho);
    d.alpha_double_prime = std::sqrt(d.rho) * p.alpha;
    return d;
}

} // namespace detail

inline DerivedParams derive_params(const SchemeParams& p,
                                   FormulaVariant v = FormulaVariant::adjudicated) {
    const FormulaVariant r = detail::resolve(v);
    return detail::derive_params_slots(
        p, detail::eps_convention(r),
        r == FormulaVariant::main_text ? detail::EtaPrimeForm::amplitude
                                       : detail::EtaPrimeForm::composed);
}

enum class ParityOutcome { even_nonzero, odd };

struct ClosedFormResult {
    double fidelity;
    double probability;
};

namespace detail {

// cosh(x)/cosh(y) without overflow for large arguments.
inline double cosh_ratio(double x, double y) {
    const double ax = std::abs(x), ay = std::abs(y);
    return std::exp(ax - ay) * (1.0 + std::exp(-2.0 * ax)) / (1.0 + std::exp(-2.0 * ay));
}

inline ClosedFormResult original_closed_form_slots(const SchemeParams& p,
                                                   ParityOutcome parity, EpsConvention ec,
                                                   EtaPrimeForm ef, OrigProbForm pf) {
    const DerivedParams d = derive_params_slots(p, ec, ef);
    const double a2 = p.alpha * p.alpha;
    const double h = 2.0 * d.epsilon_prime * d.eta_prime * a2;
    const double g = 2.0 * d.epsilon_prime * (1.0 - d.eta_prime) * a2;
    const double t2 = std::tanh(2.0 * a2);

    ClosedFormResult out{};
    out.fidelity = parity == ParityOutcome::even_nonzero
                       ? 1.0 / (1.0 + std::tanh(h) * t2)
                       : 1.0 / (1.0 + std::tanh(h) / t2);

    const double pref = std::exp(-2.0 * d.epsilon_prime * a2);
    const double d1 = 1.0 + std::exp(-2.0 * (1.0 + d.epsilon_prime) * a2);
    // cosh(g) - 1 via 2 sinh^2(g/2): exact relative accuracy for small taps.
    const double coshg_m1 = 2.0 * std::sinh(0.5 * g) * std::sinh(0.5 * g);
    if (pf == OrigProbForm::single_normalization) {
        const double e2 = std::exp(-2.0 * a2);
        out.probability =
            parity == ParityOutcome::even_nonzero
                ? pref / d1 * coshg_m1 * (std::cosh(h) * (1.0 + e2) + std::sinh(h) * (1.0 - e2))
                : pref / d1 * std::sinh(g) *
                      (std::sinh(h) * (1.0 + e2) + std::cosh(h) * (1.0 - e2));
    } else {
        const double e4 = std::exp(-4.0 * a2);
        out.probability =
            parity == ParityOutcome::even_nonzero
                ? pref / (d1 * d1) * coshg_m1 *
                      (std::cosh(h) * (1.0 + e4) + std::sinh(h) * (1.0 - e4))
                : pref / (d1 * d1) * std::sinh(g) *
                      (std::sinh(h) * (1.0 + e4) + std::cosh(h) * (1.0 - e4));
    }
    return out;
}

inline ClosedFormResult new_closed_form_slots(const SchemeParams& p, EpsConvention ec,
                                              NewFidForm ff, NewProbForm pf) {
    const DerivedParams d = derive_params_slots(p, ec, EtaPrimeForm::composed);
    const double a2 = p.alpha * p.alpha;
    const double l = p.detector_loss;

    ClosedFormResult out{};
    if (ff == NewFidForm::bare_epsilon)
        out.fidelity = 1.0 / (1.0 + std::tanh(p.epsilon * p.eta_total * a2) *
                                        std::tanh(2.0 * (1.0 - p.epsilon) * a2));
    else
        out.fidelity = 1.0 / (1.0 + std::tanh(d.epsilon_prime * p.eta_total * a2) *
                                        std::tanh(2.0 * a2));

    if (pf == NewProbForm::squared_gamma) {
        const double click = -std::expm1(-0.5 * (1.0 - l) * d.gamma * d.gamma);
        out.probability =
            click * click /
            (2.0 * (1.0 + cosh_ratio((1.0 - d.rho) * a2, (1.0 + d.rho) * a2)));
    } else {
        const double click = -std::expm1(-0.5 * (1.0 - l) * d.gamma * a2);
        out.probability = click * click *
                          (1.0 + std::exp(-(4.0 + 2.0 * d.epsilon_prime * p.eta_total) * a2)) /
                          (2.0 * (1.0 + std::exp(-2.0 * (1.0 + d.epsilon_prime) * a2)) *
                           (1.0 + std::exp(-2.0 * (1.0 - d.rho) * a2)));
    }
    return out;
}

} // namespace detail

inline ClosedFormResult original_closed_form(const SchemeParams& p, ParityOutcome parity,
                                             FormulaVariant v = FormulaVariant::adjudicated) {
    const FormulaVariant r = detail::resolve(v);
    if (r == FormulaVariant::main_text)
        return detail::original_closed_form_slots(p, parity, detail::EpsConvention::ratio,
                                                  detail::EtaPrimeForm::amplitude,
                                                  detail::OrigProbForm::single_normalization);
    return detail::original_closed_form_slots(p, parity, detail::EpsConvention::reflectivity,
                                              detail::EtaPrimeForm::composed,
                                              detail::OrigProbForm::squared_normalization);
}

inline ClosedFormResult new_closed_form(const SchemeParams& p,
                                        FormulaVariant v = FormulaVariant::adjudicated) {
    const FormulaVariant r = detail::resolve(v);
    if (r == FormulaVariant::main_text)
        return detail::new_closed_form_slots(p, detail::EpsConvention::ratio,
                                             detail::NewFidForm::bare_epsilon,
                                             detail::NewProbForm::squared_gamma);
    return detail::new_closed_form_slots(p, detail::EpsConvention::reflectivity,
                                         detail::NewFidForm::derived,
                                         detail::NewProbForm::derived);
}

// ---------------------------------------------------------------------------
// Simulation engines
// ---------------------------------------------------------------------------

namespace detail {

struct HeraldCutoff {
    int n_max;
    double tail_bound;
};

// Smallest cutoff N with a rigorous geometric bound on the Poisson(mu) tail
// sum_{k>N} below `tail_target`: for N + 2 > mu the terms decay at least
// geometrically with ratio mu/(N+2), so tail <= term_{N+1} / (1 - mu/(N+2)).
inline HeraldCutoff herald_cutoff_for(double mu, double tail_target, int n_min) {
    if (!(mu >= 0.0) || !std::isfinite(mu))
        throw DomainError("herald_cutoff_for: bad mean photon number");
    if (mu == 0.0) return {n_min, 0.0};
    double term = std::exp(-mu);
    int n = 0;
    while (n <= 100000) {
        if (n >= n_min && static_cast<double>(n) + 2.0 > mu) {
            const double t_next = term * mu / (n + 1.0);
            const double bound = t_next / (1.0 - mu / (n + 2.0));
            if (bound < tail_target) return {n, bound};
        }
        ++n;
        term *= mu / n;
    }
    throw TailBoundError("herald_cutoff_for: no admissible cutoff found");
}

// Rigorous bound on the Poisson(mu) tail beyond N (requires N + 2 > mu).
inline double herald_tail_bound(double mu, int n_max) {
    if (mu <= 0.0) return 0.0;
    if (static_cast<double>(n_max) + 2.0 <= mu)
        return 1.0; // geometric bound not applicable; treat as unbounded
    double term = std::exp(-mu);
    for (int k = 1; k <= n_max + 1; ++k) term *= mu / k;
    return term / (1.0 - mu / (n_max + 2.0));
}

constexpr double kAutoHeraldTailTarget = 1e-16;
constexpr double kUserHeraldTailLimit = 1e-12;

} // namespace detail

// Mode layout of the original scheme's 4 -> 8 network. Inputs: retained mode A,
// tap A, retained mode B, tap B. Outputs keep the first four roles (taps become
// the two detector modes after interference and detector loss), then the four
// environment modes in the order they are generated.
namespace orig_modes {
constexpr std::size_t kept_a = 0, detector_1 = 1, kept_b = 2, detector_2 = 3;
constexpr std::size_t channel_env_a = 4, channel_env_b = 5;
constexpr std::size_t detector_env_1 = 6, detector_env_2 = 7;
} // namespace orig_modes

inline LinearNetwork original_scheme_network(const SchemeParams& p) {
    validate_params(p);
    const double eta = eta_one_sided(p.eta_total);
    LinearNetwork net = identity_network(4);
    net = compose(beamsplitter(1.0 - p.epsilon, 0, 1, 4), net);
    net = compose(mode_sign_flip(1, 4), net);
    net = compose(beamsplitter(1.0 - p.epsilon, 2, 3, 4), net);
    net = compose(mode_sign_flip(3, 4), net);
    net = compose(loss_channel_isometry(eta, 1, 4), net); // -> 5 modes
    net = compose(loss_channel_isometry(eta, 3, 5), net); // -> 6 modes
    net = compose(beamsplitter(0.5, 1, 3, 6), net);
    net = compose(loss_channel_isometry(p.detector_loss, 1, 6), net); // -> 7 modes
    net = compose(loss_channel_isometry(p.detector_loss, 3, 7), net); // -> 8 modes
    return net;
}

// Mode layout of the new scheme's 4 -> 5 network. Inputs: retained mode A,
// tap A, party B's superposition, USD ancilla. Outputs: retained A, threshold
// detector 1, retained B, threshold detector 2, channel environment.
namespace new_modes {
constexpr std::size_t kept_a = 0, detector_1 = 1, kept_b = 2, detector_2 = 3;
constexpr std::size_t channel_env = 4;
} // namespace new_modes

inline LinearNetwork new_scheme_network(const SchemeParams& p, const DerivedParams& d) {
    validate_params(p);
    LinearNetwork net = identity_network(4);
    net = compose(beamsplitter(1.0 - p.epsilon, 0, 1, 4), net);
    net = compose(mode_sign_flip(1, 4), net);
    net = compose(loss_channel_isometry(p.eta_total, 1, 4), net); // -> 5 modes
    net = compose(beamsplitter(1.0 - d.rho, 2, 1, 5), net);       // B keeps mode 2, feeds USD port 1
    net = compose(beamsplitter(0.5, 1, 3, 5), net);               // USD interference with ancilla
    return net;
}

// Product of two even local superpositions at alpha', with vacuum in the taps.
// alpha' = alpha / sqrt(1 - epsilon) so the retained modes land exactly on alpha.
inline CoherentKet original_input_ket(const SchemeParams& p, const DerivedParams& d) {
    const double c = norm_const(d.alpha_prime, NormSign::plus);
    CoherentKet k(4);
    for (double sa : {1.0, -1.0})
        for (double sb : {1.0, -1.0})
            k.add_term(c * c, CoherentLabel{sa * d.alpha_prime, 0.0, sb * d.alpha_prime, 0.0});
    return k;
}

// Party A's tapped superposition, party B's superposition at sqrt(1 - rho) alpha
// (so B's retained mode also lands on alpha), and the USD ancilla beam at
// sqrt(gamma) alpha.
inline CoherentKet new_input_ket(const SchemeParams& p, const DerivedParams& d) {
    const double beta_b = std::sqrt(1.0 - d.rho) * p.alpha;
    const double c = norm_const(d.alpha_prime, NormSign::plus) * norm_const(beta_b, NormSign::plus);
    CoherentKet k(4);
    for (double sa : {1.0, -1.0})
        for (double sb : {1.0, -1.0})
            k.add_term(c, CoherentLabel{sa * d.alpha_prime, 0.0, sb * beta_b,
                                        std::sqrt(d.gamma) * p.alpha});
    return k;
}

struct SchemeResult {
    double fidelity;
    double probability;
    CoherentOperator conditional_state;
    bool correction_applied;
};

// Runs the original scheme and conditions on the chosen herald parity class
// (summing over all herald photon numbers of that parity and both detector
// assignments, with the sign-flip correction applied for the far detector).
// herald_cutoff = 0 selects an automatic cutoff with tail below 1e-16; a
// positive value is validated against the 1e-12 tail bound.
inline SchemeResult original_simulate(const SchemeParams& p, ParityOutcome parity,
                                      int herald_cutoff = 0) {
    const DerivedParams d = derive_params(p);
    const LinearNetwork net = original_scheme_network(p);
    const CoherentKet evolved = apply_network(original_input_ket(p, d), net);
    CoherentOperator rho = from_ket(evolved);
    for (std::size_t m : {std::size_t{7}, std::size_t{6}, std::size_t{5}, std::size_t{4}})
        rho = trace_out(rho, m);

    // Detected mean photon number of the brightest branch sets the herald range.
    double mu = 0.0;
    for (const KetTerm& t : evolved.terms())
        mu = std::max(mu, std::norm(t.label[orig_modes::detector_1]));

    const int n_start = parity == ParityOutcome::even_nonzero ? 2 : 1;
    int n_max = 0;
    if (herald_cutoff > 0) {
        if (detail::herald_tail_bound(mu, herald_cutoff) >= detail::kUserHeraldTailLimit)
            throw TailBoundError("original_simulate: herald cutoff fails the tail bound");
        n_max = herald_cutoff;
    } else {
        n_max = detail::herald_cutoff_for(mu, detail::kAutoHeraldTailTarget, n_start + 2).n_max;
    }

    // Mode indices after each projection: removing detector_2 (index 3) leaves
    // detector_1 at index 1; removing detector_1 (index 1) first leaves
    // detector_2 at index 2.
    CoherentOperator acc(2);
    const CoherentOperator far_silent = project_fock(rho, 3, 0);
    for (int n = n_start; n <= n_max; n += 2) acc += project_fock(far_silent, 1, n);
    const CoherentOperator near_silent = project_fock(rho, 1, 0);
    const LinearNetwork flip = mode_sign_flip(0, 2);
    for (int n = n_start; n <= n_max; n += 2)
        acc += apply_network(project_fock(near_silent, 2, n), flip);
    acc = canonicalized(acc);

    const double prob = op_trace(acc);
    if (!(prob > 0.0) || !std::isfinite(prob))
        throw DegenerateConditioningError("original_simulate: herald probability is not positive");

    SchemeResult out{0.0, prob, canonicalized(acc.scaled(1.0 / prob)), true};
    out.fidelity = fidelity_with_ket(
        out.conditional_state,
        make_ecs(p.alpha, parity == ParityOutcome::even_nonzero ? NormSign::plus : NormSign::minus));
    return out;
}

// Runs the new scheme conditioned on both threshold detectors clicking.
inline SchemeResult new_simulate(const SchemeParams& p) {
    const DerivedParams d = derive_params(p);
    const LinearNetwork net = new_scheme_network(p, d);
    CoherentOperator rho = from_ket(apply_network(new_input_ket(p, d), net));
    rho = condition_click(rho, 3, p.detector_loss); // modes now (A, det1, B, env)
    rho = condition_click(rho, 1, p.detector_loss); // modes now (A, B, env)
    rho = trace_out(rho, 2);
    rho = canonicalized(rho);

    const double prob = op_trace(rho);
    if (!(prob > 0.0) || !std::isfinite(prob))
        throw DegenerateConditioningError("new_simulate: double-click probability is not positive");

    SchemeResult out{0.0, prob, canonicalized(rho.scaled(1.0 / prob)), false};
    out.fidelity = fidelity_with_ket(out.conditional_state, make_ecs(p.alpha, NormSign::plus));
    return out;
}

// ---------------------------------------------------------------------------
// Unambiguous state discrimination of |±alpha> by interference with a reference
// beam |alpha> on a balanced beamsplitter and two lossy threshold detectors.
// Convention: the + state routes all light toward detector 1.
// ---------------------------------------------------------------------------

struct UsdDistribution {
    double detector_1; // only detector 1 clicks
    double detector_2; // only detector 2 clicks
    double failure;    // neither clicks
};

inline UsdDistribution usd_measure(double alpha, double detector_loss, NormSign input_sign) {
    if (!(std::isfinite(alpha) && alpha > 0.0)) throw DomainError("usd_measure: alpha must be positive");
    if (!(detector_loss >= 0.0 && detector_loss <= 1.0))
        throw DomainError("usd_measure: detector loss outside [0, 1]");
    CoherentKet k(2);
    k.add_term(1.0, CoherentLabel{sign_value(input_sign) * alpha, alpha});
    const CoherentOperator rho = from_ket(apply_network(k, beamsplitter(0.5, 0, 1, 2)));
    const double l = detector_loss;
    UsdDistribution out{};
    out.detector_1 = op_trace(condition_no_click(condition_click(rho, 0, l), 0, l));
    out.detector_2 = op_trace(condition_no_click(condition_click(rho, 1, l), 0, l));
    out.failure = op_trace(condition_no_click(condition_no_click(rho, 1, l), 0, l));
    return out;
}

} // namespace ecsim
