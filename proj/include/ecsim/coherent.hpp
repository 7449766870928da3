#pragma once

// Multimode coherent-state labels and their finite superpositions. Everything in
// this layer is exact closed-form algebra: overlaps of coherent products, Fock
// amplitudes, and the usual even/odd superposition states.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace ecsim {

using Complex = std::complex<double>;

enum class NormSign { plus, minus };
enum class Normalization { raw, normalized };

inline double sign_value(NormSign s) { return s == NormSign::plus ? 1.0 : -1.0; }

namespace detail {

// e^z - 1 without cancellation for small |z|.
inline Complex cexpm1(Complex z) {
    const double x = z.real(), y = z.imag();
    const double hs = std::sin(0.5 * y);
    return {std::expm1(x) * std::cos(y) - 2.0 * hs * hs, std::exp(x) * std::sin(y)};
}

inline bool is_finite(Complex z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

} // namespace detail

// An n-mode coherent product |a_0, a_1, ..., a_{n-1}>.
class CoherentLabel {
public:
    CoherentLabel() = default;
    explicit CoherentLabel(std::vector<Complex> amps) : amps_(std::move(amps)) {
        for (const Complex& a : amps_)
            if (!detail::is_finite(a)) throw DomainError("CoherentLabel: non-finite amplitude");
    }
    CoherentLabel(std::initializer_list<Complex> amps)
        : CoherentLabel(std::vector<Complex>(amps)) {}

    std::size_t mode_count() const { return amps_.size(); }
    Complex operator[](std::size_t m) const { return amps_[m]; }
    const std::vector<Complex>& amps() const { return amps_; }

    CoherentLabel without_mode(std::size_t m) const {
        if (m >= amps_.size()) throw DimensionError("CoherentLabel: mode index out of range");
        std::vector<Complex> rest;
        rest.reserve(amps_.size() - 1);
        for (std::size_t k = 0; k < amps_.size(); ++k)
            if (k != m) rest.push_back(amps_[k]);
        CoherentLabel out;
        out.amps_ = std::move(rest); // already validated
        return out;
    }

private:
    std::vector<Complex> amps_;
};

// Strict lexicographic order on (re, im) pairs; used only for canonical sorting,
// so exact floating-point comparison is intentional.
inline int compare_labels(const CoherentLabel& a, const CoherentLabel& b) {
    if (a.mode_count() != b.mode_count())
        return a.mode_count() < b.mode_count() ? -1 : 1;
    for (std::size_t m = 0; m < a.mode_count(); ++m) {
        const Complex x = a[m], y = b[m];
        if (x.real() != y.real()) return x.real() < y.real() ? -1 : 1;
        if (x.imag() != y.imag()) return x.imag() < y.imag() ? -1 : 1;
    }
    return 0;
}

inline bool labels_near_equal(const CoherentLabel& a, const CoherentLabel& b,
                              double tol = 1e-15) {
    if (a.mode_count() != b.mode_count()) return false;
    for (std::size_t m = 0; m < a.mode_count(); ++m)
        if (std::abs(a[m].real() - b[m].real()) > tol ||
            std::abs(a[m].imag() - b[m].imag()) > tol)
            return false;
    return true;
}

// Single-mode overlap <a|b> = exp(-|a|^2/2 - |b|^2/2 + conj(a) b).
inline Complex mode_overlap(Complex a, Complex b) {
    return std::exp(Complex(-0.5 * std::norm(a) - 0.5 * std::norm(b), 0.0) +
                    std::conj(a) * b);
}

// <a|b> for multimode labels; the exponents are accumulated before the single exp
// so the result stays accurate for many modes.
inline Complex overlap(const CoherentLabel& a, const CoherentLabel& b) {
    if (a.mode_count() != b.mode_count())
        throw DimensionError("overlap: mode count mismatch");
    Complex expo = 0.0;
    for (std::size_t m = 0; m < a.mode_count(); ++m)
        expo += Complex(-0.5 * std::norm(a[m]) - 0.5 * std::norm(b[m]), 0.0) +
                std::conj(a[m]) * b[m];
    return std::exp(expo);
}

// <n|beta> = e^{-|beta|^2/2} beta^n / sqrt(n!). Above n = 20 the magnitude is
// assembled in log space (lgamma) to dodge overflow in beta^n and n!.
inline Complex fock_amplitude(int n, Complex beta) {
    if (n < 0) throw DomainError("fock_amplitude: negative photon number");
    if (beta == Complex(0.0, 0.0)) return n == 0 ? 1.0 : 0.0;
    const double b2 = std::norm(beta);
    if (n <= 20) {
        Complex num = 1.0;
        double fact = 1.0;
        for (int k = 1; k <= n; ++k) {
            num *= beta;
            fact *= static_cast<double>(k);
        }
        return std::exp(-0.5 * b2) * num / std::sqrt(fact);
    }
    const double lmag =
        -0.5 * b2 + n * std::log(std::abs(beta)) - 0.5 * std::lgamma(n + 1.0);
    const double mag = std::exp(lmag);
    const double ph = n * std::arg(beta);
    return {mag * std::cos(ph), mag * std::sin(ph)};
}

// Normalization constant of |beta> ± |-beta>: 1 / sqrt(2 (1 ± e^{-2 beta^2})).
inline double norm_const(double beta, NormSign sign) {
    if (!std::isfinite(beta)) throw DomainError("norm_const: non-finite amplitude");
    const double q = std::exp(-2.0 * beta * beta);
    const double d = sign == NormSign::plus ? 2.0 * (1.0 + q) : 2.0 * (1.0 - q);
    if (d <= 0.0)
        throw SingularStateError("norm_const: zero-norm superposition (minus sign at beta = 0)");
    return 1.0 / std::sqrt(d);
}

struct KetTerm {
    Complex coeff;
    CoherentLabel label;
};

// A finite superposition sum_t c_t |label_t> over a fixed number of modes.
class CoherentKet {
public:
    explicit CoherentKet(std::size_t mode_count) : modes_(mode_count) {}
    CoherentKet(std::vector<KetTerm> terms, std::size_t mode_count)
        : modes_(mode_count), terms_(std::move(terms)) {
        for (const KetTerm& t : terms_) check_term(t);
    }

    std::size_t mode_count() const { return modes_; }
    std::size_t term_count() const { return terms_.size(); }
    const std::vector<KetTerm>& terms() const { return terms_; }

    void add_term(Complex coeff, CoherentLabel label) {
        KetTerm t{coeff, std::move(label)};
        check_term(t);
        terms_.push_back(std::move(t));
    }

private:
    void check_term(const KetTerm& t) const {
        if (t.label.mode_count() != modes_)
            throw DimensionError("CoherentKet: term mode count mismatch");
        if (!detail::is_finite(t.coeff))
            throw DomainError("CoherentKet: non-finite coefficient");
    }

    std::size_t modes_ = 0;
    std::vector<KetTerm> terms_;
};

// Single-mode even/odd superposition |beta> ± |-beta>.
inline CoherentKet make_scs(double beta, NormSign sign,
                            Normalization norm = Normalization::normalized) {
    if (beta == 0.0 && sign == NormSign::minus)
        throw SingularStateError("make_scs: minus superposition is the zero vector at beta = 0");
    const double c = norm == Normalization::normalized ? norm_const(beta, sign) : 1.0;
    CoherentKet k(1);
    k.add_term(c, CoherentLabel{Complex(beta, 0.0)});
    k.add_term(sign_value(sign) * c, CoherentLabel{Complex(-beta, 0.0)});
    return k;
}

// Two-mode entangled superposition |alpha, alpha> ± |-alpha, -alpha>; its
// normalization constant is that of a single-mode superposition at sqrt(2) alpha.
inline CoherentKet make_ecs(double alpha, NormSign sign,
                            Normalization norm = Normalization::normalized) {
    if (alpha == 0.0 && sign == NormSign::minus)
        throw SingularStateError("make_ecs: minus superposition is the zero vector at alpha = 0");
    const double c =
        norm == Normalization::normalized ? norm_const(std::sqrt(2.0) * alpha, sign) : 1.0;
    CoherentKet k(2);
    k.add_term(c, CoherentLabel{Complex(alpha, 0.0), Complex(alpha, 0.0)});
    k.add_term(sign_value(sign) * c,
               CoherentLabel{Complex(-alpha, 0.0), Complex(-alpha, 0.0)});
    return k;
}

inline Complex ket_inner(const CoherentKet& a, const CoherentKet& b) {
    if (a.mode_count() != b.mode_count())
        throw DimensionError("ket_inner: mode count mismatch");
    Complex acc = 0.0;
    for (const KetTerm& ta : a.terms())
        for (const KetTerm& tb : b.terms())
            acc += std::conj(ta.coeff) * tb.coeff * overlap(ta.label, tb.label);
    return acc;
}

inline double ket_norm_sq(const CoherentKet& k) {
    const Complex n = ket_inner(k, k);
    if (std::abs(n.imag()) > 1e-12 * std::max(1.0, std::abs(n.real())))
        throw std::runtime_error("ket_norm_sq: non-negligible imaginary part");
    return n.real();
}

// |<a|b>|^2 normalized by both norms; defined only for nonzero-norm kets.
inline double ket_fidelity(const CoherentKet& a, const CoherentKet& b) {
    const double na = ket_norm_sq(a), nb = ket_norm_sq(b);
    if (na <= 0.0 || nb <= 0.0)
        throw SingularStateError("ket_fidelity: zero-norm ket");
    return std::norm(ket_inner(a, b)) / (na * nb);
}

// Sorts terms, merges terms whose labels agree entrywise within merge_tol
// (coefficients added), and drops exact-zero coefficients.
inline CoherentKet canonicalized(const CoherentKet& k, double merge_tol = 1e-15) {
    std::vector<KetTerm> ts = k.terms();
    std::sort(ts.begin(), ts.end(), [](const KetTerm& a, const KetTerm& b) {
        return compare_labels(a.label, b.label) < 0;
    });
    std::vector<KetTerm> out;
    for (KetTerm& t : ts) {
        if (!out.empty() && labels_near_equal(out.back().label, t.label, merge_tol))
            out.back().coeff += t.coeff;
        else
            out.push_back(std::move(t));
    }
    std::vector<KetTerm> kept;
    for (KetTerm& t : out)
        if (std::abs(t.coeff) != 0.0) kept.push_back(std::move(t));
    return CoherentKet(std::move(kept), k.mode_count());
}

} // namespace ecsim
