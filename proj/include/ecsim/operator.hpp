#pragma once

// Density-operator algebra over coherent dyads |ket_label><bra_label|, plus the
// linear-optical maps that act on it exactly: passive networks and loss
// isometries (label rewriting), partial trace, photon-number projection, and
// threshold-detector conditioning. All maps are closed on finite dyad sums.

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coherent.hpp"
#include "errors.hpp"

namespace ecsim {

struct DyadTerm {
    Complex coeff;
    CoherentLabel ket;
    CoherentLabel bra;
};

class CoherentOperator {
public:
    explicit CoherentOperator(std::size_t mode_count) : modes_(mode_count) {}
    CoherentOperator(std::vector<DyadTerm> terms, std::size_t mode_count)
        : modes_(mode_count), terms_(std::move(terms)) {
        for (const DyadTerm& t : terms_) check_term(t);
    }

    std::size_t mode_count() const { return modes_; }
    std::size_t term_count() const { return terms_.size(); }
    const std::vector<DyadTerm>& terms() const { return terms_; }

    void add_term(Complex coeff, CoherentLabel ket, CoherentLabel bra) {
        DyadTerm t{coeff, std::move(ket), std::move(bra)};
        check_term(t);
        terms_.push_back(std::move(t));
    }

    CoherentOperator& operator+=(const CoherentOperator& o) {
        if (o.modes_ != modes_) throw DimensionError("operator+=: mode count mismatch");
        terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
        return *this;
    }

    CoherentOperator scaled(Complex f) const {
        CoherentOperator out(modes_);
        out.terms_.reserve(terms_.size());
        for (const DyadTerm& t : terms_)
            out.terms_.push_back({f * t.coeff, t.ket, t.bra});
        return out;
    }

    CoherentOperator adjoint() const {
        CoherentOperator out(modes_);
        out.terms_.reserve(terms_.size());
        for (const DyadTerm& t : terms_)
            out.terms_.push_back({std::conj(t.coeff), t.bra, t.ket});
        return out;
    }

private:
    void check_term(const DyadTerm& t) const {
        if (t.ket.mode_count() != modes_ || t.bra.mode_count() != modes_)
            throw DimensionError("CoherentOperator: term mode count mismatch");
        if (!detail::is_finite(t.coeff))
            throw DomainError("CoherentOperator: non-finite coefficient");
    }

    std::size_t modes_ = 0;
    std::vector<DyadTerm> terms_;
};

inline CoherentOperator operator+(CoherentOperator a, const CoherentOperator& b) {
    a += b;
    return a;
}

// |psi><psi| with k^2 dyads for a k-term ket.
inline CoherentOperator from_ket(const CoherentKet& psi) {
    CoherentOperator rho(psi.mode_count());
    for (const KetTerm& ti : psi.terms())
        for (const KetTerm& tj : psi.terms())
            rho.add_term(ti.coeff * std::conj(tj.coeff), ti.label, tj.label);
    return rho;
}

// A passive linear map on mode amplitudes. Columns must be orthonormal (an
// isometry), which is exactly the condition under which coherent labels map to
// coherent labels with unchanged term coefficients.
class LinearNetwork {
public:
    explicit LinearNetwork(Eigen::MatrixXcd m) : m_(std::move(m)) {
        if (m_.cols() == 0 || m_.rows() < m_.cols())
            throw DimensionError("LinearNetwork: matrix must be tall (out_modes >= in_modes)");
        const Eigen::MatrixXcd g = m_.adjoint() * m_;
        const Eigen::MatrixXcd id =
            Eigen::MatrixXcd::Identity(m_.cols(), m_.cols());
        if ((g - id).cwiseAbs().maxCoeff() > 1e-12)
            throw DomainError("LinearNetwork: columns are not orthonormal");
    }

    std::size_t in_modes() const { return static_cast<std::size_t>(m_.cols()); }
    std::size_t out_modes() const { return static_cast<std::size_t>(m_.rows()); }
    const Eigen::MatrixXcd& matrix() const { return m_; }

    CoherentLabel apply(const CoherentLabel& l) const {
        if (l.mode_count() != in_modes())
            throw DimensionError("LinearNetwork: label mode count mismatch");
        Eigen::VectorXcd v(m_.cols());
        for (std::size_t m = 0; m < l.mode_count(); ++m) v(static_cast<long>(m)) = l[m];
        const Eigen::VectorXcd w = m_ * v;
        std::vector<Complex> out(w.size());
        for (long i = 0; i < w.size(); ++i) out[static_cast<std::size_t>(i)] = w(i);
        return CoherentLabel(std::move(out));
    }

private:
    Eigen::MatrixXcd m_;
};

inline LinearNetwork identity_network(std::size_t n) {
    return LinearNetwork(Eigen::MatrixXcd::Identity(static_cast<long>(n), static_cast<long>(n)));
}

// Beamsplitter of energy transmissivity t on modes (i, j):
// a_i -> sqrt(t) a_i + sqrt(1-t) a_j,  a_j -> -sqrt(1-t) a_i + sqrt(t) a_j.
inline LinearNetwork beamsplitter(double t, std::size_t i, std::size_t j, std::size_t n) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("beamsplitter: transmissivity outside [0, 1]");
    if (i >= n || j >= n || i == j) throw DimensionError("beamsplitter: bad mode indices");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(static_cast<long>(n), static_cast<long>(n));
    const double c = std::sqrt(t), s = std::sqrt(1.0 - t);
    m(static_cast<long>(i), static_cast<long>(i)) = c;
    m(static_cast<long>(i), static_cast<long>(j)) = s;
    m(static_cast<long>(j), static_cast<long>(i)) = -s;
    m(static_cast<long>(j), static_cast<long>(j)) = c;
    return LinearNetwork(std::move(m));
}

inline LinearNetwork phase_shift(double phi, std::size_t i, std::size_t n) {
    if (i >= n) throw DimensionError("phase_shift: bad mode index");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(static_cast<long>(n), static_cast<long>(n));
    m(static_cast<long>(i), static_cast<long>(i)) = std::exp(Complex(0.0, phi));
    return LinearNetwork(std::move(m));
}

// Exact pi phase: multiplies the mode amplitude by -1 with no trigonometric
// rounding (sin(pi) is not exactly zero in floating point).
inline LinearNetwork mode_sign_flip(std::size_t i, std::size_t n) {
    if (i >= n) throw DimensionError("mode_sign_flip: bad mode index");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(static_cast<long>(n), static_cast<long>(n));
    m(static_cast<long>(i), static_cast<long>(i)) = -1.0;
    return LinearNetwork(std::move(m));
}

// Loss of transmitted energy fraction eta on mode i, modeled as a beamsplitter
// into a fresh environment mode appended as the last output index:
// a_i -> sqrt(1-eta) a_i (mode i) + sqrt(eta) a_i (new mode n).
inline LinearNetwork loss_channel_isometry(double eta, std::size_t i, std::size_t n) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("loss_channel_isometry: eta outside [0, 1]");
    if (i >= n) throw DimensionError("loss_channel_isometry: bad mode index");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<long>(n) + 1, static_cast<long>(n));
    for (std::size_t k = 0; k < n; ++k)
        m(static_cast<long>(k), static_cast<long>(k)) = 1.0;
    m(static_cast<long>(i), static_cast<long>(i)) = std::sqrt(1.0 - eta);
    m(static_cast<long>(n), static_cast<long>(i)) = std::sqrt(eta);
    return LinearNetwork(std::move(m));
}

// second ∘ first.
inline LinearNetwork compose(const LinearNetwork& second, const LinearNetwork& first) {
    if (second.in_modes() != first.out_modes())
        throw DimensionError("compose: mode count mismatch between stages");
    return LinearNetwork(second.matrix() * first.matrix());
}

inline CoherentKet apply_network(const CoherentKet& psi, const LinearNetwork& net) {
    if (psi.mode_count() != net.in_modes())
        throw DimensionError("apply_network: ket mode count mismatch");
    CoherentKet out(net.out_modes());
    for (const KetTerm& t : psi.terms()) out.add_term(t.coeff, net.apply(t.label));
    return out;
}

inline CoherentOperator apply_network(const CoherentOperator& rho, const LinearNetwork& net) {
    if (rho.mode_count() != net.in_modes())
        throw DimensionError("apply_network: operator mode count mismatch");
    CoherentOperator out(net.out_modes());
    for (const DyadTerm& t : rho.terms())
        out.add_term(t.coeff, net.apply(t.ket), net.apply(t.bra));
    return out;
}

// Partial trace over one mode: each dyad picks up the scalar <bra_i|ket_i>.
inline CoherentOperator trace_out(const CoherentOperator& rho, std::size_t mode) {
    if (mode >= rho.mode_count()) throw DimensionError("trace_out: bad mode index");
    CoherentOperator out(rho.mode_count() - 1);
    for (const DyadTerm& t : rho.terms())
        out.add_term(t.coeff * mode_overlap(t.bra[mode], t.ket[mode]),
                     t.ket.without_mode(mode), t.bra.without_mode(mode));
    return out;
}

// Unnormalized conditioning <n|rho|n> on mode `mode`; the result's trace is the
// outcome probability.
inline CoherentOperator project_fock(const CoherentOperator& rho, std::size_t mode, int n) {
    if (mode >= rho.mode_count()) throw DimensionError("project_fock: bad mode index");
    if (n < 0) throw DomainError("project_fock: negative photon number");
    CoherentOperator out(rho.mode_count() - 1);
    for (const DyadTerm& t : rho.terms())
        out.add_term(t.coeff * fock_amplitude(n, t.ket[mode]) *
                         std::conj(fock_amplitude(n, t.bra[mode])),
                     t.ket.without_mode(mode), t.bra.without_mode(mode));
    return out;
}

namespace detail {

// Factors for conditioning mode amplitudes (k, b) of a dyad on a threshold
// detector with loss l. The lost fraction is diverted to an environment mode and
// traced (factor <sqrt(l) b|sqrt(l) k>); the kept fraction meets the POVM element.
// For "click" (I - |0><0|) the factor is e^{-s} (e^{conj(b') k'} - 1) with
// s = (|k'|^2 + |b'|^2)/2, evaluated through expm1 so that near-vacuum dyads
// (where the click amplitude nearly cancels) keep full relative accuracy.
struct ClickFactors {
    Complex click;
    Complex no_click;
};

inline ClickFactors click_factors(Complex k, Complex b, double loss) {
    const double keep = std::sqrt(1.0 - loss), lost = std::sqrt(loss);
    const Complex env = mode_overlap(lost * b, lost * k);
    const Complex kd = keep * k, bd = keep * b;
    const double s = 0.5 * (std::norm(kd) + std::norm(bd));
    const Complex vac = std::exp(Complex(-s, 0.0));
    return {env * vac * cexpm1(std::conj(bd) * kd), env * vac};
}

} // namespace detail

// Unnormalized conditioning of mode `mode` on a lossy threshold detector firing.
// Equivalent to routing fraction `detector_loss` of the light to a traced
// environment and applying (I - |0><0|) to the remainder; the mode is consumed.
inline CoherentOperator condition_click(const CoherentOperator& rho, std::size_t mode,
                                        double detector_loss) {
    if (mode >= rho.mode_count()) throw DimensionError("condition_click: bad mode index");
    if (!(detector_loss >= 0.0 && detector_loss <= 1.0))
        throw DomainError("condition_click: detector loss outside [0, 1]");
    CoherentOperator out(rho.mode_count() - 1);
    for (const DyadTerm& t : rho.terms())
        out.add_term(t.coeff * detail::click_factors(t.ket[mode], t.bra[mode], detector_loss).click,
                     t.ket.without_mode(mode), t.bra.without_mode(mode));
    return out;
}

// Complementary outcome: the lossy threshold detector stays silent.
inline CoherentOperator condition_no_click(const CoherentOperator& rho, std::size_t mode,
                                           double detector_loss) {
    if (mode >= rho.mode_count()) throw DimensionError("condition_no_click: bad mode index");
    if (!(detector_loss >= 0.0 && detector_loss <= 1.0))
        throw DomainError("condition_no_click: detector loss outside [0, 1]");
    CoherentOperator out(rho.mode_count() - 1);
    for (const DyadTerm& t : rho.terms())
        out.add_term(t.coeff *
                         detail::click_factors(t.ket[mode], t.bra[mode], detector_loss).no_click,
                     t.ket.without_mode(mode), t.bra.without_mode(mode));
    return out;
}

struct DetectionOutcome {
    enum class Kind { fock, click, no_click, trace };
    Kind kind;
    std::size_t mode;
    int photons = 0;           // used by Kind::fock
    double detector_loss = 0.0; // used by Kind::click / Kind::no_click
};

inline CoherentOperator apply_detection(const CoherentOperator& rho,
                                        const DetectionOutcome& d) {
    switch (d.kind) {
        case DetectionOutcome::Kind::fock: return project_fock(rho, d.mode, d.photons);
        case DetectionOutcome::Kind::click: return condition_click(rho, d.mode, d.detector_loss);
        case DetectionOutcome::Kind::no_click:
            return condition_no_click(rho, d.mode, d.detector_loss);
        case DetectionOutcome::Kind::trace: return trace_out(rho, d.mode);
    }
    throw DomainError("apply_detection: unknown outcome kind");
}

// Trace of a Hermitian-symmetric dyad sum; the imaginary part must vanish to
// rounding and is checked.
inline double op_trace(const CoherentOperator& rho) {
    Complex acc = 0.0;
    for (const DyadTerm& t : rho.terms()) acc += t.coeff * overlap(t.bra, t.ket);
    if (std::abs(acc.imag()) > 1e-10 * std::max(1.0, std::abs(acc.real())))
        throw std::runtime_error("op_trace: non-negligible imaginary part");
    return acc.real();
}

// <psi|rho|psi> (not normalized by either side).
inline Complex expectation(const CoherentOperator& rho, const CoherentKet& psi) {
    if (rho.mode_count() != psi.mode_count())
        throw DimensionError("expectation: mode count mismatch");
    Complex acc = 0.0;
    for (const DyadTerm& t : rho.terms()) {
        Complex left = 0.0, right = 0.0; // <psi|ket_t>, <bra_t|psi>
        for (const KetTerm& p : psi.terms()) {
            left += std::conj(p.coeff) * overlap(p.label, t.ket);
            right += p.coeff * overlap(t.bra, p.label);
        }
        acc += t.coeff * left * right;
    }
    return acc;
}

// <psi|rho|psi> / (tr rho * <psi|psi>) for Hermitian rho.
inline double fidelity_with_ket(const CoherentOperator& rho, const CoherentKet& psi) {
    const double tr = op_trace(rho);
    if (!(tr > 0.0))
        throw DegenerateConditioningError("fidelity_with_ket: nonpositive trace");
    const double nn = ket_norm_sq(psi);
    if (nn <= 0.0) throw SingularStateError("fidelity_with_ket: zero-norm reference ket");
    return expectation(rho, psi).real() / (tr * nn);
}

// Sorts dyads by (ket, bra) labels, merges entrywise-near-equal label pairs, and
// drops exact-zero coefficients.
inline CoherentOperator canonicalized(const CoherentOperator& rho, double merge_tol = 1e-15) {
    std::vector<DyadTerm> ts = rho.terms();
    std::sort(ts.begin(), ts.end(), [](const DyadTerm& a, const DyadTerm& b) {
        const int c = compare_labels(a.ket, b.ket);
        if (c != 0) return c < 0;
        return compare_labels(a.bra, b.bra) < 0;
    });
    std::vector<DyadTerm> merged;
    for (DyadTerm& t : ts) {
        if (!merged.empty() && labels_near_equal(merged.back().ket, t.ket, merge_tol) &&
            labels_near_equal(merged.back().bra, t.bra, merge_tol))
            merged.back().coeff += t.coeff;
        else
            merged.push_back(std::move(t));
    }
    std::vector<DyadTerm> kept;
    for (DyadTerm& t : merged)
        if (std::abs(t.coeff) != 0.0) kept.push_back(std::move(t));
    return CoherentOperator(std::move(kept), rho.mode_count());
}

// Largest coefficient of rho - rho^dagger after canonical merging; ~1e-16 for
// operators built from Hermitian pipelines.
inline double hermiticity_defect(const CoherentOperator& rho) {
    const CoherentOperator diff = canonicalized(rho + rho.adjoint().scaled(-1.0));
    double worst = 0.0;
    for (const DyadTerm& t : diff.terms()) worst = std::max(worst, std::abs(t.coeff));
    return worst;
}

} // namespace ecsim
