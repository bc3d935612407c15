#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "cvtomo/errors.hpp"
#include "cvtomo/gaussian_state.hpp"
#include "cvtomo/linalg.hpp"
#include "cvtomo/symplectic.hpp"

namespace cvtomo {

// Truncated n-mode Fock space: all occupation vectors k with sum(k) <= cutoff,
// enumerated grade by grade (total photon number ascending) and within a grade
// lexicographically with k_1 most significant.  The ordering is part of the
// on-disk format and must never change.
class FockSpace {
public:
    FockSpace(int n, int cutoff) : n_(n), cutoff_(cutoff) {
        if (n < 1 || n > 8) throw numerical_error("FockSpace: n out of range");
        if (cutoff < 0 || cutoff > 255)
            throw numerical_error("FockSpace: cutoff out of range");
        std::vector<int> k(n, 0);
        grade_offset_.assign(cutoff + 2, 0);
        for (int g = 0; g <= cutoff; ++g) {
            grade_offset_[g] = static_cast<int>(basis_.size());
            enumerate(k, 0, g);
        }
        grade_offset_[cutoff + 1] = static_cast<int>(basis_.size());
        for (std::size_t i = 0; i < basis_.size(); ++i)
            index_[pack(basis_[i])] = static_cast<int>(i);
    }

    int modes() const { return n_; }
    int cutoff() const { return cutoff_; }
    int dim() const { return static_cast<int>(basis_.size()); }
    const std::vector<int>& state(int i) const { return basis_[i]; }
    int grade(int i) const {
        int s = 0;
        for (int v : basis_[i]) s += v;
        return s;
    }
    // First basis index of total photon number g (g = cutoff+1 gives dim).
    int grade_begin(int g) const { return grade_offset_[g]; }

    int index_of(const std::vector<int>& k) const {
        auto it = index_.find(pack(k));
        if (it == index_.end())
            throw numerical_error("FockSpace: occupation vector outside space");
        return it->second;
    }
    bool contains(const std::vector<int>& k) const {
        return index_.find(pack(k)) != index_.end();
    }

    bool same_as(const FockSpace& other) const {
        return n_ == other.n_ && cutoff_ == other.cutoff_;
    }

private:
    void enumerate(std::vector<int>& k, int pos, int remaining) {
        if (pos == n_ - 1) {
            k[pos] = remaining;
            basis_.push_back(k);
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            k[pos] = v;
            enumerate(k, pos + 1, remaining - v);
        }
    }

    static std::uint64_t pack(const std::vector<int>& k) {
        std::uint64_t key = 0;
        for (int v : k) key = (key << 8) | static_cast<std::uint64_t>(v & 0xff);
        return key;
    }

    int n_;
    int cutoff_;
    std::vector<std::vector<int>> basis_;
    std::vector<int> grade_offset_;
    std::unordered_map<std::uint64_t, int> index_;
};

// Density matrix on a truncated space.  `deficit` records the probability
// weight discarded by the truncation before renormalization.
struct FockDensity {
    FockSpace space;
    CMat rho;
    double deficit = 0.0;
};

inline FockDensity from_pure(const FockSpace& space, const CVec& psi) {
    if (psi.size() != space.dim())
        throw numerical_error("from_pure: dimension mismatch");
    const double nrm = psi.norm();
    if (nrm < 1e-300) throw numerical_error("from_pure: zero vector");
    const CVec v = psi / nrm;
    return {space, v * v.adjoint(), 0.0};
}

inline FockDensity fock_state_density(const FockSpace& space,
                                      const std::vector<int>& k) {
    CVec psi = CVec::Zero(space.dim());
    psi(space.index_of(k)) = 1.0;
    return from_pure(space, psi);
}

// Quadrature operators x_1, p_1, ..., x_n, p_n from truncated ladder algebra:
// x = (a + a^dag)/sqrt(2), p = i(a^dag - a)/sqrt(2).
inline std::vector<CMat> quadrature_operators(const FockSpace& space) {
    const int d = space.dim();
    const int n = space.modes();
    std::vector<CMat> ops(2 * n, CMat::Zero(d, d));
    const std::complex<double> i_unit(0.0, 1.0);
    for (int col = 0; col < d; ++col) {
        std::vector<int> k = space.state(col);
        for (int j = 0; j < n; ++j) {
            if (k[j] > 0) {  // a_j |k> = sqrt(k_j) |k - e_j>
                k[j] -= 1;
                const int row = space.index_of(k);
                k[j] += 1;
                const double amp = std::sqrt(double(k[j]) / 2.0);
                ops[2 * j](row, col) += amp;          // from a
                ops[2 * j + 1](row, col) += -i_unit * amp;  // from -a
            }
            if (space.grade(col) + 1 <= space.cutoff()) {
                k[j] += 1;
                const int row = space.index_of(k);
                k[j] -= 1;
                const double amp = std::sqrt(double(k[j] + 1) / 2.0);
                ops[2 * j](row, col) += amp;               // from a^dag
                ops[2 * j + 1](row, col) += i_unit * amp;  // from +a^dag
            }
        }
    }
    return ops;
}

namespace detail {

// h = -i log(u) for unitary u, via the complex Schur form (diagonal for
// normal matrices); exp(-i h) = u and h is Hermitian.
inline CMat unitary_log_hamiltonian(const CMat& u) {
    Eigen::ComplexSchur<CMat> schur(u);
    const int n = static_cast<int>(u.rows());
    CVec theta(n);
    for (int j = 0; j < n; ++j) {
        std::complex<double> lambda = schur.matrixT()(j, j);
        const double mag = std::abs(lambda);
        if (mag < 0.5) throw numerical_error("unitary log: input far from unitary");
        theta(j) = -std::arg(lambda / mag);
    }
    CMat h = schur.matrixU() * theta.asDiagonal() * schur.matrixU().adjoint();
    return 0.5 * (h + h.adjoint());
}

// Photon-number-conserving unitary exp(-i sum h_jk a_j^dag a_k), materialized
// one total-photon grade at a time (each grade block is a small Hermitian
// exponential).
inline CMat passive_unitary(const FockSpace& space, const CMat& u) {
    const int d = space.dim();
    const int n = space.modes();
    const CMat h = unitary_log_hamiltonian(u);
    CMat out = CMat::Zero(d, d);
    for (int g = 0; g <= space.cutoff(); ++g) {
        const int b = space.grade_begin(g);
        const int e = space.grade_begin(g + 1);
        const int gd = e - b;
        CMat hg = CMat::Zero(gd, gd);
        for (int col = b; col < e; ++col) {
            const std::vector<int>& l = space.state(col);
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    if (h(j, k) == std::complex<double>(0.0, 0.0)) continue;
                    if (j == k) {
                        hg(col - b, col - b) += h(j, j) * double(l[j]);
                    } else if (l[k] > 0) {
                        std::vector<int> target = l;
                        target[k] -= 1;
                        target[j] += 1;
                        const int row = space.index_of(target);
                        hg(row - b, col - b) +=
                            h(j, k) * std::sqrt(double(l[k]) * double(l[j] + 1));
                    }
                }
        }
        Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (hg + hg.adjoint()));
        CVec phase(gd);
        for (int i = 0; i < gd; ++i)
            phase(i) = std::exp(std::complex<double>(0.0, -es.eigenvalues()(i)));
        out.block(b, b, gd, gd) =
            es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
    }
    return out;
}

// Single-mode squeeze exp((r/2)(a^dag^2 - a^2)) computed at an enlarged
// internal cutoff and cut back, so the retained block is accurate.  The
// generator only couples k <-> k+2, so the even and odd ladders diagonalize
// separately.
inline CMat single_mode_squeeze(int m_out, double r) {
    const double z = std::exp(std::abs(r));
    const int m_int =
        std::max(m_out + 16, static_cast<int>(std::ceil((m_out + 1) * z * z)) + 24);
    Mat gen = Mat::Zero(m_int + 1, m_int + 1);
    for (int k = 0; k + 2 <= m_int; ++k) {
        const double c = 0.5 * r * std::sqrt(double(k + 1) * double(k + 2));
        gen(k + 2, k) = c;   // a^dag^2 part
        gen(k, k + 2) = -c;  // -a^2 part
    }
    Mat full = Mat::Zero(m_int + 1, m_int + 1);
    for (int parity = 0; parity < 2; ++parity) {
        std::vector<int> idx;
        for (int k = parity; k <= m_int; k += 2) idx.push_back(k);
        const int s = static_cast<int>(idx.size());
        // B = i * (skew sub-block) is Hermitian; exp(gen) = exp(-i B).
        CMat b(s, s);
        for (int a = 0; a < s; ++a)
            for (int c = 0; c < s; ++c)
                b(a, c) = std::complex<double>(0.0, 1.0) * gen(idx[a], idx[c]);
        Eigen::SelfAdjointEigenSolver<CMat> es(b);
        CVec phase(s);
        for (int i = 0; i < s; ++i)
            phase(i) = std::exp(std::complex<double>(0.0, -es.eigenvalues()(i)));
        CMat ub = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
        for (int a = 0; a < s; ++a)
            for (int c = 0; c < s; ++c) full(idx[a], idx[c]) = ub(a, c).real();
    }
    return full.topLeftCorner(m_out + 1, m_out + 1).cast<std::complex<double>>();
}

// Single-mode displacement exp(alpha a^dag - conj(alpha) a), same enlarged
// cutoff scheme; the generator is tridiagonal.
inline CMat single_mode_displace(int m_out, std::complex<double> alpha) {
    const double a2 = std::norm(alpha);
    const int m_int = m_out + static_cast<int>(std::ceil(4.0 * a2 + 12.0 * std::sqrt(a2 + 1.0))) + 24;
    CMat b = CMat::Zero(m_int + 1, m_int + 1);  // B = i*(alpha a^dag - conj a)
    const std::complex<double> i_unit(0.0, 1.0);
    for (int k = 0; k + 1 <= m_int; ++k) {
        const double root = std::sqrt(double(k + 1));
        b(k + 1, k) += i_unit * alpha * root;
        b(k, k + 1) += -i_unit * std::conj(alpha) * root;
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (b + b.adjoint()));
    CVec phase(m_int + 1);
    for (int i = 0; i <= m_int; ++i)
        phase(i) = std::exp(std::complex<double>(0.0, -es.eigenvalues()(i)));
    CMat full = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
    return full.topLeftCorner(m_out + 1, m_out + 1);
}

// Left-multiplies M by the graded restriction of the tensor product of
// per-mode single-mode operators, one mode at a time; never forms the dense
// tensor operator.
inline CMat apply_mode_factors_left(const FockSpace& space,
                                    const std::vector<CMat>& factors, CMat m) {
    const int d = space.dim();
    const int cutoff = space.cutoff();
    for (int j = 0; j < space.modes(); ++j) {
        const CMat& a = factors[j];
        CMat out = CMat::Zero(d, m.cols());
        for (int row = 0; row < d; ++row) {
            std::vector<int> k = space.state(row);
            const int rest = space.grade(row) - k[j];
            const int kj = k[j];
            for (int kp = 0; kp + rest <= cutoff; ++kp) {
                const std::complex<double> c = a(kj, kp);
                if (c == std::complex<double>(0.0, 0.0)) continue;
                k[j] = kp;
                out.row(row) += c * m.row(space.index_of(k));
            }
            k[j] = kj;
        }
        m.swap(out);
    }
    return m;
}

// Left-multiplies by a grade-block-diagonal operator (cheap: block rows).
inline CMat apply_block_diag_left(const FockSpace& space, const CMat& blocks,
                                  const CMat& m) {
    CMat out(m.rows(), m.cols());
    for (int g = 0; g <= space.cutoff(); ++g) {
        const int b = space.grade_begin(g);
        const int e = space.grade_begin(g + 1);
        out.middleRows(b, e - b) =
            blocks.block(b, b, e - b, e - b) * m.middleRows(b, e - b);
    }
    return out;
}

inline CMat unitary_from_euler(const FockSpace& space, const EulerDecomposition& euler,
                               const Vec& disp) {
    const int n = space.modes();
    const int m = space.cutoff();

    // u with passive_from_unitary(u) = O, read back entrywise.
    auto passive_to_unitary = [n](const Mat& o) {
        CMat u(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                u(j, k) = std::complex<double>(o(2 * j, 2 * k), o(2 * j + 1, 2 * k));
        return u;
    };

    CMat acc = passive_unitary(space, passive_to_unitary(euler.O2));

    bool any_squeeze = false;
    for (int j = 0; j < n; ++j) any_squeeze = any_squeeze || euler.z(j) > 1.0 + 1e-14;
    if (any_squeeze) {
        std::vector<CMat> factors;
        factors.reserve(n);
        for (int j = 0; j < n; ++j)
            factors.push_back(single_mode_squeeze(m, std::log(euler.z(j))));
        acc = apply_mode_factors_left(space, factors, std::move(acc));
    }

    acc = apply_block_diag_left(space, passive_unitary(space, passive_to_unitary(euler.O1)), acc);

    if (disp.norm() > 1e-15) {
        std::vector<CMat> factors;
        factors.reserve(n);
        for (int j = 0; j < n; ++j) {
            const std::complex<double> alpha(disp(2 * j) / std::sqrt(2.0),
                                             disp(2 * j + 1) / std::sqrt(2.0));
            factors.push_back(single_mode_displace(m, alpha));
        }
        acc = apply_mode_factors_left(space, factors, std::move(acc));
    }
    return acc;
}

}  // namespace detail

struct GaussianUnitaryOptions {
    // Leakage gate: columns of total photon number <= cutoff - interior_margin
    // must keep norm within leakage_budget of 1.
    double leakage_budget = 1e-6;
    int interior_margin = 5;
    bool check_leakage = true;
};

// Truncated matrix of the Gaussian unitary with moment action R -> S R + d,
// composed as displacement * passive * squeeze * passive from the Euler
// factors of S.
inline CMat gaussian_unitary_matrix(const FockSpace& space, const Mat& S,
                                    const Vec& d,
                                    const GaussianUnitaryOptions& opts = {}) {
    if (S.rows() != 2 * space.modes() || d.size() != 2 * space.modes())
        throw numerical_error("gaussian_unitary_matrix: dimension mismatch");
    if (!is_symplectic(S))
        throw numerical_error("gaussian_unitary_matrix: S is not symplectic");
    const CMat u = detail::unitary_from_euler(space, bloch_messiah(S), d);
    if (opts.check_leakage) {
        const int gmax = std::max(0, space.cutoff() - opts.interior_margin);
        double worst = 0.0;
        for (int c = 0; c < space.grade_begin(gmax + 1); ++c)
            worst = std::max(worst, std::abs(u.col(c).norm() - 1.0));
        if (worst > opts.leakage_budget)
            throw numerical_error(
                "gaussian_unitary_matrix: truncation leakage " +
                std::to_string(worst) + " exceeds budget; raise the cutoff");
    }
    return u;
}

// Exact mean of the total-energy operator (N + n/2 per the convention used
// throughout) on a truncated density matrix.
inline double fock_mean_energy(const FockDensity& rho) {
    double s = 0.0;
    for (int i = 0; i < rho.space.dim(); ++i)
        s += rho.rho(i, i).real() * (rho.space.grade(i) + 0.5 * rho.space.modes());
    return s;
}

inline double fock_energy_second_moment(const FockDensity& rho) {
    double s = 0.0;
    for (int i = 0; i < rho.space.dim(); ++i) {
        const double e = rho.space.grade(i) + 0.5 * rho.space.modes();
        s += rho.rho(i, i).real() * e * e;
    }
    return s;
}

inline double fock_mean_photon_number(const FockDensity& rho) {
    return fock_mean_energy(rho) - 0.5 * rho.space.modes();
}

// Gaussian state materialized on the truncated space: thermal weights from
// the Williamson spectrum, conjugated by the Gaussian unitary of (S, m).
// The discarded weight (thermal tail plus unitary leakage) is recorded and
// the result renormalized.
inline FockDensity gaussian_density_matrix(const FockSpace& space,
                                           const GaussianState& state) {
    if (state.n != space.modes())
        throw numerical_error("gaussian_density_matrix: mode count mismatch");
    const SymplecticDecomposition w = williamson(state.V);

    Vec weights(space.dim());
    for (int i = 0; i < space.dim(); ++i) {
        const std::vector<int>& k = space.state(i);
        double p = 1.0;
        for (int j = 0; j < state.n; ++j) {
            const double nu = 0.5 * (w.d(j) - 1.0);
            const double ratio = nu / (nu + 1.0);
            p *= std::pow(ratio, k[j]) / (nu + 1.0);
        }
        weights(i) = p;
    }

    GaussianUnitaryOptions opts;
    opts.check_leakage = false;  // the recorded deficit is the error account
    const CMat u = gaussian_unitary_matrix(space, w.S, state.m, opts);
    const CMat scaled = u * weights.asDiagonal();
    CMat rho = scaled * u.adjoint();
    rho = 0.5 * (rho + rho.adjoint());

    const double tr = rho.trace().real();
    if (tr < 1e-12)
        throw numerical_error("gaussian_density_matrix: cutoff far too small");
    FockDensity out{space, rho / tr, 1.0 - tr};
    return out;
}

// Smallest cutoff whose constructed deficit meets the target: geometric
// initial guess from the mean photon number, then verify and grow.  Returns
// the constructed density so callers do not pay twice.
inline FockDensity gaussian_density_auto(const GaussianState& state,
                                         double target_deficit,
                                         int max_cutoff = 200) {
    const double nphot = std::max(mean_photon_number(state), 0.0);
    int m = std::max(8, static_cast<int>(std::ceil(3.0 * nphot + 14.0)));
    for (;;) {
        if (m > max_cutoff)
            throw numerical_error("gaussian_density_auto: cutoff demand exceeds limit");
        FockDensity rho = gaussian_density_matrix(FockSpace(state.n, m), state);
        if (rho.deficit <= target_deficit) return rho;
        m = static_cast<int>(std::ceil(m * 1.35)) + 2;
    }
}

inline double trace_distance_exact(const FockDensity& r1, const FockDensity& r2) {
    if (!r1.space.same_as(r2.space))
        throw numerical_error("trace_distance_exact: spaces differ");
    const CMat diff = r1.rho - r2.rho;
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (diff + diff.adjoint()),
                                           Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// Projection onto total photon number <= m_keep: returns the renormalized
// projected state (on the smaller space) and the retained probability.
inline std::pair<FockDensity, double> project_energy_subspace(
    const FockDensity& rho, int m_keep) {
    if (m_keep < 0 || m_keep > rho.space.cutoff())
        throw numerical_error("project_energy_subspace: bad cutoff");
    const int d = rho.space.grade_begin(m_keep + 1);
    const CMat block = rho.rho.topLeftCorner(d, d);
    const double weight = block.trace().real();
    if (weight < 1e-300)
        throw numerical_error("project_energy_subspace: zero retained weight");
    FockDensity out{FockSpace(rho.space.modes(), m_keep), block / weight, 0.0};
    return {out, weight};
}

// Guaranteed ceiling sqrt(n*N_phot/m') on the trace distance moved by the
// projection (first-moment Markov case).
inline double truncation_bound(const GaussianState& state, int m_prime) {
    if (m_prime < 1) throw numerical_error("truncation_bound: cutoff must be >= 1");
    const double nphot = std::max(mean_photon_number(state), 0.0);
    return std::sqrt(state.n * nphot / double(m_prime));
}

// Projective vacuum measurement on the selected tail modes: returns the
// success probability and the renormalized head-mode state.
inline std::pair<double, FockDensity> vacuum_projector_measurement(
    const FockDensity& rho, const std::vector<int>& tail_modes) {
    const int n = rho.space.modes();
    std::vector<bool> is_tail(n, false);
    for (int t : tail_modes) {
        if (t < 0 || t >= n || is_tail[t])
            throw numerical_error("vacuum_projector_measurement: bad tail set");
        is_tail[t] = true;
    }
    if (tail_modes.size() == static_cast<std::size_t>(n))
        throw numerical_error("vacuum_projector_measurement: no head modes left");
    std::vector<int> head;
    for (int j = 0; j < n; ++j)
        if (!is_tail[j]) head.push_back(j);

    FockSpace head_space(static_cast<int>(head.size()), rho.space.cutoff());
    // Indices of full-space basis states whose tail occupation vanishes, in
    // head-space order.
    std::vector<int> sel(head_space.dim());
    for (int i = 0; i < head_space.dim(); ++i) {
        std::vector<int> full(n, 0);
        const std::vector<int>& hk = head_space.state(i);
        for (std::size_t a = 0; a < head.size(); ++a) full[head[a]] = hk[a];
        sel[i] = rho.space.index_of(full);
    }

    CMat block(head_space.dim(), head_space.dim());
    for (int r = 0; r < head_space.dim(); ++r)
        for (int c = 0; c < head_space.dim(); ++c)
            block(r, c) = rho.rho(sel[r], sel[c]);
    const double success = block.trace().real();
    if (success < 1e-300)
        return {0.0, FockDensity{head_space, CMat::Zero(head_space.dim(),
                                                        head_space.dim()), 0.0}};
    return {success, FockDensity{head_space, block / success, 0.0}};
}

}  // namespace cvtomo
