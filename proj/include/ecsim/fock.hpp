#pragma once

// Independent verification engine in truncated photon-number space. Everything
// here is brute-force dense linear algebra on number-basis amplitudes --
// deliberately sharing no algebra with the coherent-label engine -- so agreement
// between the two is meaningful evidence of correctness.
//
// States carry a running bound `err` on the amplitude-space distance between the
// computed vector and the untruncated one. Beamsplitters conserve total photon
// number, so they are applied block-by-block per photon-number sector; sectors
// that fit entirely inside the truncation window transform exactly, and the mass
// of incomplete sectors is charged to `err` (2 sqrt(mass), since both the true
// and the computed unitary are contractions there). Oracle results convert the
// final budget into bounds on the reported probability and fidelity, first order
// in the residual.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "schemes.hpp"

namespace ecsim {

struct FockState {
    std::vector<int> dims;  // per-mode dimension (cutoff + 1)
    Eigen::VectorXcd amp;   // C-order: mode 0 varies slowest
    double err = 0.0;       // bound on || computed - true || in amplitude norm

    std::size_t mode_count() const { return dims.size(); }
};

inline std::size_t fock_size(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) {
        if (d <= 0) throw DimensionError("fock_size: nonpositive mode dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

namespace detail {

inline std::vector<std::size_t> fock_strides(const std::vector<int>& dims) {
    std::vector<std::size_t> s(dims.size(), 1);
    for (int m = static_cast<int>(dims.size()) - 2; m >= 0; --m)
        s[static_cast<std::size_t>(m)] =
            s[static_cast<std::size_t>(m) + 1] * static_cast<std::size_t>(dims[static_cast<std::size_t>(m) + 1]);
    return s;
}

// Flat offsets of all index tuples whose digits at the `skip` modes are zero, in
// lexicographic order of the remaining digits (mode 0 slowest).
inline std::vector<std::size_t> spectator_bases(const std::vector<int>& dims,
                                                const std::vector<std::size_t>& skip) {
    const std::vector<std::size_t> strides = fock_strides(dims);
    std::vector<std::size_t> bases{0};
    for (std::size_t m = 0; m < dims.size(); ++m) {
        bool skipped = false;
        for (std::size_t s : skip) skipped = skipped || s == m;
        if (skipped) continue;
        std::vector<std::size_t> next;
        next.reserve(bases.size() * static_cast<std::size_t>(dims[m]));
        for (std::size_t b : bases)
            for (int n = 0; n < dims[m]; ++n)
                next.push_back(b + static_cast<std::size_t>(n) * strides[m]);
        bases = std::move(next);
    }
    return bases;
}

} // namespace detail

inline FockState fock_vacuum(std::vector<int> dims) {
    FockState s{std::move(dims), Eigen::VectorXcd::Zero(0), 0.0};
    s.amp = Eigen::VectorXcd::Zero(static_cast<long>(fock_size(s.dims)));
    s.amp(0) = 1.0;
    return s;
}

// Truncated coherent state; the kept amplitudes are exact, so the truncation
// error equals the square root of the missing Poisson tail mass.
inline FockState coherent_fock(Complex beta, int dim) {
    if (dim <= 0) throw DimensionError("coherent_fock: nonpositive dimension");
    FockState s{{dim}, Eigen::VectorXcd(dim), 0.0};
    double mass = 0.0;
    for (int n = 0; n < dim; ++n) {
        const Complex a = fock_amplitude(n, beta);
        s.amp(n) = a;
        mass += std::norm(a);
    }
    s.err = std::sqrt(std::max(0.0, 1.0 - mass));
    return s;
}

inline double norm_sq(const FockState& s) { return s.amp.squaredNorm(); }

inline FockState tensor(const FockState& x, const FockState& y) {
    FockState out;
    out.dims = x.dims;
    out.dims.insert(out.dims.end(), y.dims.begin(), y.dims.end());
    const long nx = x.amp.size(), ny = y.amp.size();
    out.amp.resize(nx * ny);
    for (long i = 0; i < nx; ++i) out.amp.segment(i * ny, ny) = x.amp(i) * y.amp;
    out.err = x.err + y.err; // valid for sub-unit-norm factors
    return out;
}

// Single-mode even/odd superposition, normalized to unit norm in the truncated
// space. Error budget: the two coherent construction deficits enter both the
// vector and the renormalization, hence the factor 2 * norm_const.
inline FockState scs_fock(double beta, NormSign sign, int dim) {
    const double nc = norm_const(beta, sign); // throws for the singular case
    const FockState a = coherent_fock(Complex(beta, 0.0), dim);
    const FockState b = coherent_fock(Complex(-beta, 0.0), dim);
    FockState s{{dim}, a.amp + sign_value(sign) * b.amp, 0.0};
    const double nv = s.amp.norm();
    if (nv <= 0.0) throw SingularStateError("scs_fock: zero truncated norm");
    s.amp /= nv;
    s.err = 2.0 * nc * (a.err + b.err);
    return s;
}

// Two-mode entangled superposition, normalized in the truncated space.
inline FockState ecs_fock(double alpha, NormSign sign, int dim) {
    const double nc = norm_const(std::sqrt(2.0) * alpha, sign);
    const FockState cp = coherent_fock(Complex(alpha, 0.0), dim);
    const FockState cm = coherent_fock(Complex(-alpha, 0.0), dim);
    const FockState pp = tensor(cp, cp), mm = tensor(cm, cm);
    FockState s{pp.dims, pp.amp + sign_value(sign) * mm.amp, 0.0};
    const double nv = s.amp.norm();
    if (nv <= 0.0) throw SingularStateError("ecs_fock: zero truncated norm");
    s.amp /= nv;
    s.err = 2.0 * nc * (pp.err + mm.err);
    return s;
}

namespace detail {

struct BsBlocks {
    std::vector<int> kmin;             // first mode-i photon number of each sector
    std::vector<Eigen::MatrixXcd> u;   // sector unitaries, indexed by total photons
};

// Sector-block decomposition of the two-mode beamsplitter unitary matching the
// label convention a_i -> sqrt(t) a_i + sqrt(1-t) a_j. Within the sector of T
// total photons the generator is a real antisymmetric tridiagonal matrix, so the
// block is obtained from a Hermitian eigendecomposition of i*G.
inline BsBlocks bs_sector_blocks(double t, int di, int dj) {
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("bs_sector_blocks: transmissivity outside [0, 1]");
    const double theta = std::atan2(std::sqrt(1.0 - t), std::sqrt(t));
    BsBlocks out;
    for (int T = 0; T <= di + dj - 2; ++T) {
        const int kmin = std::max(0, T - (dj - 1));
        const int kmax = std::min(di - 1, T);
        const int n = kmax - kmin + 1;
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
        for (int r = 0; r + 1 < n; ++r) {
            const int k = kmin + r;
            const double g =
                theta * std::sqrt(static_cast<double>(k + 1) * static_cast<double>(T - k));
            h(r + 1, r) = Complex(0.0, g);
            h(r, r + 1) = Complex(0.0, -g);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        Eigen::VectorXcd ph(n);
        for (int r = 0; r < n; ++r)
            ph(r) = std::exp(Complex(0.0, -es.eigenvalues()(r)));
        out.u.push_back(es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint());
        out.kmin.push_back(kmin);
    }
    return out;
}

} // namespace detail

// Dense beamsplitter matrix on the truncated pair space, row/column index
// k_i * dj + k_j. Used by tests to cross-check the blocked application.
inline Eigen::MatrixXcd fock_beamsplitter(double t, int di, int dj) {
    if (di <= 0 || dj <= 0) throw DimensionError("fock_beamsplitter: nonpositive dimension");
    const detail::BsBlocks blocks = detail::bs_sector_blocks(t, di, dj);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(di * dj, di * dj);
    for (int T = 0; T < static_cast<int>(blocks.u.size()); ++T) {
        const int kmin = blocks.kmin[static_cast<std::size_t>(T)];
        const auto& u = blocks.u[static_cast<std::size_t>(T)];
        for (int r = 0; r < u.rows(); ++r)
            for (int c = 0; c < u.cols(); ++c) {
                const int kr = kmin + r, kc = kmin + c;
                m(kr * dj + (T - kr), kc * dj + (T - kc)) = u(r, c);
            }
    }
    return m;
}

// In-place blocked beamsplitter on modes (i, j). Sectors with total photon
// number above min(d_i, d_j) - 1 do not fit in the window; their mass is charged
// to the error budget.
inline void apply_beamsplitter(FockState& s, double t, std::size_t i, std::size_t j) {
    if (i >= s.mode_count() || j >= s.mode_count() || i == j)
        throw DimensionError("apply_beamsplitter: bad mode indices");
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("apply_beamsplitter: transmissivity outside [0, 1]");
    if (t == 1.0) return; // exact identity, no truncation charge
    const int di = s.dims[i], dj = s.dims[j];
    const detail::BsBlocks blocks = detail::bs_sector_blocks(t, di, dj);
    const std::vector<std::size_t> strides = detail::fock_strides(s.dims);
    const std::vector<std::size_t> bases = detail::spectator_bases(s.dims, {i, j});
    const int tmax = di + dj - 2;
    const int complete_max = std::min(di, dj) - 1;

    std::vector<std::vector<std::size_t>> offs(static_cast<std::size_t>(tmax) + 1);
    for (int T = 0; T <= tmax; ++T) {
        const int kmin = std::max(0, T - (dj - 1)), kmax = std::min(di - 1, T);
        for (int k = kmin; k <= kmax; ++k)
            offs[static_cast<std::size_t>(T)].push_back(
                static_cast<std::size_t>(k) * strides[i] +
                static_cast<std::size_t>(T - k) * strides[j]);
    }

    double incomplete_mass = 0.0;
    std::vector<Complex> x, y;
    for (const std::size_t base : bases) {
        for (int T = 0; T <= tmax; ++T) {
            const auto& off = offs[static_cast<std::size_t>(T)];
            const auto& u = blocks.u[static_cast<std::size_t>(T)];
            const int n = static_cast<int>(off.size());
            x.assign(static_cast<std::size_t>(n), Complex(0.0, 0.0));
            for (int r = 0; r < n; ++r) x[static_cast<std::size_t>(r)] = s.amp(static_cast<long>(base + off[static_cast<std::size_t>(r)]));
            if (T > complete_max)
                for (int r = 0; r < n; ++r) incomplete_mass += std::norm(x[static_cast<std::size_t>(r)]);
            y.assign(static_cast<std::size_t>(n), Complex(0.0, 0.0));
            for (int r = 0; r < n; ++r) {
                Complex acc = 0.0;
                for (int c = 0; c < n; ++c) acc += u(r, c) * x[static_cast<std::size_t>(c)];
                y[static_cast<std::size_t>(r)] = acc;
            }
            for (int r = 0; r < n; ++r) s.amp(static_cast<long>(base + off[static_cast<std::size_t>(r)])) = y[static_cast<std::size_t>(r)];
        }
    }
    s.err += 2.0 * std::sqrt(incomplete_mass);
}

// Multiplies amplitudes by (-1)^{n_i}: an exact pi phase on mode i.
inline void apply_parity_phase(FockState& s, std::size_t i) {
    if (i >= s.mode_count()) throw DimensionError("apply_parity_phase: bad mode index");
    const std::vector<std::size_t> strides = detail::fock_strides(s.dims);
    for (const std::size_t base : detail::spectator_bases(s.dims, {i}))
        for (int n = 1; n < s.dims[i]; n += 2)
            s.amp(static_cast<long>(base + static_cast<std::size_t>(n) * strides[i])) *= -1.0;
}

// Enlarges the truncation window of one mode (amplitudes above the old cutoff
// are zero, so the state is unchanged).
inline void pad_mode(FockState& s, std::size_t i, int new_dim) {
    if (i >= s.mode_count()) throw DimensionError("pad_mode: bad mode index");
    if (new_dim < s.dims[i]) throw DimensionError("pad_mode: cannot shrink a mode");
    if (new_dim == s.dims[i]) return;
    std::size_t outer = 1, inner = 1;
    for (std::size_t m = 0; m < i; ++m) outer *= static_cast<std::size_t>(s.dims[m]);
    for (std::size_t m = i + 1; m < s.mode_count(); ++m) inner *= static_cast<std::size_t>(s.dims[m]);
    const std::size_t d_old = static_cast<std::size_t>(s.dims[i]);
    const std::size_t d_new = static_cast<std::size_t>(new_dim);
    Eigen::VectorXcd na = Eigen::VectorXcd::Zero(static_cast<long>(outer * d_new * inner));
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t n = 0; n < d_old; ++n)
            na.segment(static_cast<long>((o * d_new + n) * inner), static_cast<long>(inner)) =
                s.amp.segment(static_cast<long>((o * d_old + n) * inner), static_cast<long>(inner));
    s.amp = std::move(na);
    s.dims[i] = new_dim;
}

// Adjusts the truncation window of one mode: growing pads with zeros, shrinking
// drops the out-of-window amplitudes and charges their mass to the error budget.
inline void resize_mode(FockState& s, std::size_t i, int new_dim) {
    if (i >= s.mode_count()) throw DimensionError("resize_mode: bad mode index");
    if (new_dim <= 0) throw DimensionError("resize_mode: nonpositive dimension");
    if (new_dim >= s.dims[i]) {
        pad_mode(s, i, new_dim);
        return;
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t m = 0; m < i; ++m) outer *= static_cast<std::size_t>(s.dims[m]);
    for (std::size_t m = i + 1; m < s.mode_count(); ++m)
        inner *= static_cast<std::size_t>(s.dims[m]);
    const std::size_t d_old = static_cast<std::size_t>(s.dims[i]);
    const std::size_t d_new = static_cast<std::size_t>(new_dim);
    Eigen::VectorXcd na(static_cast<long>(outer * d_new * inner));
    double dropped = 0.0;
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t n = 0; n < d_old; ++n) {
            const auto seg =
                s.amp.segment(static_cast<long>((o * d_old + n) * inner), static_cast<long>(inner));
            if (n < d_new)
                na.segment(static_cast<long>((o * d_new + n) * inner), static_cast<long>(inner)) = seg;
            else
                dropped += seg.squaredNorm();
        }
    }
    s.amp = std::move(na);
    s.dims[i] = new_dim;
    s.err += std::sqrt(dropped);
}

// Routes energy fraction eta of mode i into a fresh vacuum mode appended as the
// last index, via a beamsplitter of transmissivity 1 - eta.
inline void apply_loss(FockState& s, double eta, std::size_t i, int env_dim) {
    if (i >= s.mode_count()) throw DimensionError("apply_loss: bad mode index");
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("apply_loss: eta outside [0, 1]");
    if (env_dim <= 0) throw DimensionError("apply_loss: nonpositive environment dimension");
    const long old_size = s.amp.size();
    Eigen::VectorXcd na = Eigen::VectorXcd::Zero(old_size * env_dim);
    for (long k = 0; k < old_size; ++k) na(k * env_dim) = s.amp(k);
    s.amp = std::move(na);
    s.dims.push_back(env_dim);
    if (eta > 0.0) apply_beamsplitter(s, 1.0 - eta, i, s.mode_count() - 1);
}

// Unnormalized conditioning on exactly n photons in mode i; the squared norm of
// the result is the outcome probability. n at or above the window returns the
// zero state. The parent error budget is inherited; callers that enumerate a
// complete outcome family should zero it and account for the parent once.
inline FockState project_mode(const FockState& s, std::size_t i, int n) {
    if (i >= s.mode_count()) throw DimensionError("project_mode: bad mode index");
    if (n < 0) throw DomainError("project_mode: negative photon number");
    std::vector<int> rdims;
    for (std::size_t m = 0; m < s.mode_count(); ++m)
        if (m != i) rdims.push_back(s.dims[m]);
    if (rdims.empty()) rdims.push_back(1); // keep a scalar as a 1-dim state
    FockState out{rdims, Eigen::VectorXcd::Zero(static_cast<long>(fock_size(rdims))), s.err};
    if (n >= s.dims[i]) return out;
    const std::vector<std::size_t> strides = detail::fock_strides(s.dims);
    const std::vector<std::size_t> bases = detail::spectator_bases(s.dims, {i});
    const std::size_t shift = static_cast<std::size_t>(n) * strides[i];
    for (std::size_t r = 0; r < bases.size(); ++r)
        out.amp(static_cast<long>(r)) = s.amp(static_cast<long>(bases[r] + shift));
    return out;
}

inline std::vector<double> mode_marginal(const FockState& s, std::size_t i) {
    if (i >= s.mode_count()) throw DimensionError("mode_marginal: bad mode index");
    const std::vector<std::size_t> strides = detail::fock_strides(s.dims);
    std::vector<double> out(static_cast<std::size_t>(s.dims[i]), 0.0);
    for (const std::size_t base : detail::spectator_bases(s.dims, {i}))
        for (int n = 0; n < s.dims[i]; ++n)
            out[static_cast<std::size_t>(n)] +=
                std::norm(s.amp(static_cast<long>(base + static_cast<std::size_t>(n) * strides[i])));
    return out;
}

// phi = <target|psi>, contracting the listed psi modes (in target mode order)
// against the target; the remaining psi modes survive in order. Target windows
// may be narrower than the corresponding psi windows.
inline FockState contract_target(const FockState& psi, const FockState& target,
                                 const std::vector<std::size_t>& modes) {
    if (modes.size() != target.mode_count())
        throw DimensionError("contract_target: mode list does not match target");
    for (std::size_t r = 0; r < modes.size(); ++r) {
        if (modes[r] >= psi.mode_count())
            throw DimensionError("contract_target: bad psi mode index");
        if (target.dims[r] > psi.dims[modes[r]])
            throw DimensionError("contract_target: target window exceeds psi window");
    }
    const std::vector<std::size_t> strides = detail::fock_strides(psi.dims);
    const std::vector<std::size_t> tstrides = detail::fock_strides(target.dims);
    // psi offset of each target flat index
    std::vector<std::size_t> toff(static_cast<std::size_t>(target.amp.size()), 0);
    for (std::size_t tf = 0; tf < toff.size(); ++tf) {
        std::size_t off = 0;
        for (std::size_t r = 0; r < modes.size(); ++r) {
            const std::size_t digit = (tf / tstrides[r]) % static_cast<std::size_t>(target.dims[r]);
            off += digit * strides[modes[r]];
        }
        toff[tf] = off;
    }
    std::vector<int> rdims;
    for (std::size_t m = 0; m < psi.mode_count(); ++m) {
        bool contracted = false;
        for (std::size_t mm : modes) contracted = contracted || mm == m;
        if (!contracted) rdims.push_back(psi.dims[m]);
    }
    if (rdims.empty()) rdims.push_back(1);
    const std::vector<std::size_t> bases = detail::spectator_bases(psi.dims, modes);
    FockState out{rdims, Eigen::VectorXcd::Zero(static_cast<long>(fock_size(rdims))), 0.0};
    for (std::size_t r = 0; r < bases.size(); ++r) {
        Complex acc = 0.0;
        for (std::size_t tf = 0; tf < toff.size(); ++tf)
            acc += std::conj(target.amp(static_cast<long>(tf))) *
                   psi.amp(static_cast<long>(bases[r] + toff[tf]));
        out.amp(static_cast<long>(r)) = acc;
    }
    return out;
}

// Smallest window covering a Poisson(nbar) photon distribution up to the given
// tail mass (so the amplitude-space truncation error is at most its square root).
inline int dim_for_mean(double nbar, double tail_mass = 1e-20, int min_dim = 6,
                        int max_dim = 80) {
    if (nbar <= 0.0) return 1;
    const int n = detail::herald_cutoff_for(nbar, tail_mass, min_dim - 1).n_max;
    return std::min(max_dim, n + 1);
}

// ---------------------------------------------------------------------------
// Oracle runs of the two schemes
// ---------------------------------------------------------------------------

enum class OracleTarget { original_even, original_odd, original_vacuum, new_scheme };

struct OracleResult {
    double fidelity;
    double probability;
    double truncation_bound; // bound on both |prob - true| and |fidelity - true|
};

namespace detail {

// P(counter reads n | m photons incident) for a counter that loses each photon
// independently with probability l.
inline double lossy_read_weight(int m, int n, double l) {
    if (n > m || n < 0) return 0.0;
    if (l == 0.0) return m == n ? 1.0 : 0.0;
    if (l == 1.0) return n == 0 ? 1.0 : 0.0;
    const double lg =
        std::lgamma(m + 1.0) - std::lgamma(n + 1.0) - std::lgamma(m - n + 1.0);
    return std::exp(lg + n * std::log1p(-l) + (m - n) * std::log(l));
}

// Adds  sum |psi|^2 w1(m_i) w2(m_j)  to prob and the target-contracted analogue
// to fnum. Detector POVMs diagonal in photon number enter probabilities and
// number-diagonal conditional mixtures exactly this way.
inline void accumulate_weighted(const FockState& joint, const std::vector<double>& w1,
                                std::size_t mode1, const std::vector<double>& w2,
                                std::size_t mode2, const FockState& target,
                                const std::vector<std::size_t>& target_modes,
                                double& prob, double& fnum) {
    const std::vector<std::size_t> strides = fock_strides(joint.dims);
    const std::size_t d1 = static_cast<std::size_t>(joint.dims[mode1]);
    const std::size_t d2 = static_cast<std::size_t>(joint.dims[mode2]);
    for (long f = 0; f < joint.amp.size(); ++f) {
        const std::size_t uf = static_cast<std::size_t>(f);
        const std::size_t m1 = (uf / strides[mode1]) % d1;
        const std::size_t m2 = (uf / strides[mode2]) % d2;
        prob += std::norm(joint.amp(f)) * w1[m1] * w2[m2];
    }
    // the contraction keeps (mode1, mode2) in mode order
    const FockState phi = contract_target(joint, target, target_modes);
    const bool swapped = mode2 < mode1;
    const std::size_t da = static_cast<std::size_t>(phi.dims[0]);
    const std::size_t db = static_cast<std::size_t>(phi.dims[1]);
    for (long f = 0; f < phi.amp.size(); ++f) {
        const std::size_t uf = static_cast<std::size_t>(f);
        const std::size_t a = uf / db, b = uf % db;
        (void)da;
        const double wa = swapped ? w2[a] : w1[a];
        const double wb = swapped ? w1[b] : w2[b];
        fnum += std::norm(phi.amp(f)) * wa * wb;
    }
}

inline OracleResult finish_oracle(double prob, double fnum, double amp_err,
                                  double target_err, double herald_tail) {
    const double sp = std::sqrt(std::max(prob, 0.0));
    const double p_bound = amp_err * (2.0 * sp + amp_err) + herald_tail;
    const double sn = std::sqrt(std::max(fnum, 0.0));
    const double e2 = amp_err + target_err;
    const double n_bound = e2 * (2.0 * sn + e2);
    OracleResult out{};
    out.probability = prob;
    out.fidelity = prob > 0.0 ? fnum / prob : 0.0;
    out.truncation_bound =
        prob > 0.0 ? std::max(p_bound, (n_bound + out.fidelity * p_bound) / prob) : 1.0;
    return out;
}

} // namespace detail

// Original scheme in number space. The channel environments are enumerated as
// explicit measurement branches; detector loss and photon counting enter through
// number-diagonal read weights, which is exact for counting statistics.
inline OracleResult oracle_original(const SchemeParams& p, ParityOutcome parity,
                                    bool vacuum_class, int cutoff) {
    validate_params(p);
    if (cutoff < 8) throw DomainError("oracle_original: cutoff must be at least 8");
    const DerivedParams d = derive_params(p);
    const double a2 = p.alpha * p.alpha, l = p.detector_loss;
    const double eta = d.eta_one_sided;
    const int dk = cutoff + 1;
    const double tap_mean = d.epsilon_prime * a2;
    const int dd = dim_for_mean(2.0 * (1.0 - eta) * tap_mean);

    // One party: (kept, tap, channel environment). The tap window matches the
    // source window while they interfere, so every populated photon-number
    // sector is complete; the tap is shrunk afterwards with an explicit,
    // accounted truncation. The environment window covers the full tap content
    // (not just its mean leakage), so the enumerated branches are exhaustive.
    FockState party = tensor(scs_fock(d.alpha_prime, NormSign::plus, dk),
                             fock_vacuum({dk}));
    apply_beamsplitter(party, 1.0 - p.epsilon, 0, 1);
    apply_parity_phase(party, 1);
    const int de = dim_for_mean(tap_mean);
    apply_loss(party, eta, 1, de);
    resize_mode(party, 1, dd);
    const double party_err = party.err;

    std::vector<FockState> branches;
    for (int a = 0; a < de; ++a) {
        FockState b = project_mode(party, 2, a);
        b.err = 0.0; // parent budget charged once, below
        branches.push_back(std::move(b));
    }
    const double mu = 2.0 * d.epsilon_prime * (1.0 - d.eta_prime) * a2; // read mean
    const int n_start = vacuum_class ? 0 : (parity == ParityOutcome::even_nonzero ? 2 : 1);
    int n_max = 0;
    double tail = 0.0;
    if (!vacuum_class) {
        n_max = std::min(
            detail::herald_cutoff_for(mu, detail::kAutoHeraldTailTarget, n_start + 2).n_max,
            dd - 1);
        tail = detail::herald_tail_bound(mu, n_max);
    }

    std::vector<double> w_class(static_cast<std::size_t>(dd), 0.0);
    std::vector<double> w_zero(static_cast<std::size_t>(dd), 0.0);
    for (int m = 0; m < dd; ++m) {
        w_zero[static_cast<std::size_t>(m)] = detail::lossy_read_weight(m, 0, l);
        if (vacuum_class) {
            w_class[static_cast<std::size_t>(m)] = w_zero[static_cast<std::size_t>(m)];
        } else {
            double acc = 0.0;
            for (int n = n_start; n <= std::min(n_max, m); n += 2)
                acc += detail::lossy_read_weight(m, n, l);
            w_class[static_cast<std::size_t>(m)] = acc;
        }
    }

    FockState target = ecs_fock(
        p.alpha, vacuum_class || parity == ParityOutcome::even_nonzero ? NormSign::plus
                                                                       : NormSign::minus,
        dk);
    FockState target_flip = target;
    apply_parity_phase(target_flip, 0); // far-detector herald, correction folded into the target

    double prob = 0.0, fnum = 0.0;
    double amp_err = 2.0 * party_err; // two party copies
    for (std::size_t a = 0; a < branches.size(); ++a) {
        for (std::size_t b = 0; b < branches.size(); ++b) {
            FockState joint = tensor(branches[a], branches[b]); // (A, tapA, B, tapB)
            joint.err = 0.0;
            apply_beamsplitter(joint, 0.5, 1, 3);
            amp_err += joint.err; // per-branch interference truncation
            detail::accumulate_weighted(joint, w_class, 1, w_zero, 3, target, {0, 2}, prob, fnum);
            if (!vacuum_class)
                detail::accumulate_weighted(joint, w_zero, 1, w_class, 3, target_flip, {0, 2},
                                            prob, fnum);
        }
    }
    return detail::finish_oracle(prob, fnum, amp_err, target.err, tail);
}

// New scheme in number space: channel environment enumerated as branches, the
// two threshold detectors entered through the diagonal click weights 1 - l^n.
inline OracleResult oracle_new(const SchemeParams& p, int cutoff) {
    validate_params(p);
    if (cutoff < 8) throw DomainError("oracle_new: cutoff must be at least 8");
    const DerivedParams d = derive_params(p);
    const double a2 = p.alpha * p.alpha, l = p.detector_loss;
    const int dk = cutoff + 1;
    const double tap_mean = d.epsilon_prime * a2;

    // The tap keeps the full source window through every beamsplitter it meets:
    // first against the source, then (after the channel) against party B's
    // bright mode, so all populated sectors stay complete. The environment
    // window covers the full tap content, making the branches exhaustive.
    FockState party = tensor(scs_fock(d.alpha_prime, NormSign::plus, dk),
                             fock_vacuum({dk}));
    apply_beamsplitter(party, 1.0 - p.epsilon, 0, 1);
    apply_parity_phase(party, 1);
    const int de = dim_for_mean(tap_mean);
    apply_loss(party, p.eta_total, 1, de);
    const double party_err = party.err;

    const FockState b_state = scs_fock(std::sqrt(1.0 - d.rho) * p.alpha, NormSign::plus, dk);
    const int dd = dim_for_mean(2.0 * d.gamma * a2 + d.rho * a2);
    const FockState anc = coherent_fock(Complex(std::sqrt(d.gamma) * p.alpha, 0.0), dd);

    std::vector<double> w_click_port(static_cast<std::size_t>(dk), 0.0);
    for (int m = 0; m < dk; ++m)
        w_click_port[static_cast<std::size_t>(m)] = 1.0 - detail::lossy_read_weight(m, 0, l);
    std::vector<double> w_click_anc(static_cast<std::size_t>(dd), 0.0);
    for (int m = 0; m < dd; ++m)
        w_click_anc[static_cast<std::size_t>(m)] = 1.0 - detail::lossy_read_weight(m, 0, l);

    const FockState target = ecs_fock(p.alpha, NormSign::plus, dk);

    double prob = 0.0, fnum = 0.0;
    double amp_err = party_err + b_state.err + anc.err;
    for (int a = 0; a < de; ++a) {
        FockState branch = project_mode(party, 2, a);
        branch.err = 0.0;
        FockState joint = tensor(tensor(branch, b_state), anc); // (A, tap, B, ancilla)
        joint.err = 0.0;
        apply_beamsplitter(joint, 1.0 - d.rho, 2, 1); // B keeps mode 2, feeds the USD port
        apply_beamsplitter(joint, 0.5, 1, 3);         // USD interference with the ancilla
        amp_err += joint.err;
        detail::accumulate_weighted(joint, w_click_port, 1, w_click_anc, 3, target, {0, 2},
                                    prob, fnum);
    }
    return detail::finish_oracle(prob, fnum, amp_err, target.err, 0.0);
}

inline OracleResult oracle_run(const SchemeParams& p, OracleTarget t, int cutoff = 40) {
    switch (t) {
        case OracleTarget::original_even:
            return oracle_original(p, ParityOutcome::even_nonzero, false, cutoff);
        case OracleTarget::original_odd:
            return oracle_original(p, ParityOutcome::odd, false, cutoff);
        case OracleTarget::original_vacuum:
            return oracle_original(p, ParityOutcome::even_nonzero, true, cutoff);
        case OracleTarget::new_scheme: return oracle_new(p, cutoff);
    }
    throw DomainError("oracle_run: unknown target");
}

} // namespace ecsim
