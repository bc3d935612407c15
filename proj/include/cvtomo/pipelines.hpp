#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cvtomo/complexity.hpp"
#include "cvtomo/errors.hpp"
#include "cvtomo/estimation.hpp"
#include "cvtomo/fock.hpp"
#include "cvtomo/gaussian_state.hpp"
#include "cvtomo/json_io.hpp"
#include "cvtomo/measurement.hpp"
#include "cvtomo/rng.hpp"
#include "cvtomo/symplectic.hpp"

namespace cvtomo {

// Classical description of a state of the form D_m U_S (|head> (x) |0>^(n-t)).
// For t = 0 the head slot holds a placeholder vacuum and is ignored by
// reconstruction.
struct CompressedEstimate {
    int n = 0;
    int t = 0;
    Vec m_tilde;
    Mat s_tilde;
    FockDensity head{FockSpace(1, 0), CMat::Ones(1, 1), 0.0};
};

struct TomographyReport {
    std::variant<GaussianState, FockDensity, CompressedEstimate> estimator;
    std::int64_t copies_used = 0;
    double eps_target = 0.0;
    double delta_target = 0.0;
    std::optional<double> achieved_distance;
    std::map<std::string, double> diagnostics;
};

// Lift a density operator to a space with the same mode count and a larger
// cutoff; the extra basis states carry zero weight.
inline FockDensity embed_density(const FockDensity& rho, const FockSpace& target) {
    if (target.modes() != rho.space.modes())
        throw numerical_error("embed_density: mode count mismatch");
    if (target.cutoff() < rho.space.cutoff())
        throw numerical_error("embed_density: target cutoff too small");
    if (target.same_as(rho.space)) return rho;
    const int d = rho.space.dim();
    std::vector<int> sel(d);
    for (int i = 0; i < d; ++i) sel[i] = target.index_of(rho.space.state(i));
    CMat out = CMat::Zero(target.dim(), target.dim());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out(sel[i], sel[j]) = rho.rho(i, j);
    return {target, out, rho.deficit};
}

inline double trace_distance_embedded(const FockDensity& a, const FockDensity& b) {
    if (a.space.same_as(b.space)) return trace_distance_exact(a, b);
    if (a.space.cutoff() < b.space.cutoff())
        return trace_distance_exact(embed_density(a, b.space), b);
    return trace_distance_exact(a, embed_density(b, a.space));
}

namespace detail {

inline std::int64_t binomial_draw(prng& gen, std::int64_t trials, double p) {
    if (trials < 0) throw numerical_error("binomial_draw: negative trial count");
    p = std::clamp(p, 0.0, 1.0);
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < trials; ++i)
        if (gen.uniform() < p) ++hits;
    return hits;
}

}  // namespace detail

// Linear-inversion tomography from a fresh Haar-random orthonormal basis per
// shot.  Averaging the observed rank-one projectors gives (rho + I)/(d+1) in
// expectation, so (d+1)*mean - I is unbiased and the error decays with the
// full shot count; a fixed basis family would instead hit a floor at the
// basis-sampling noise.  Only the observed basis vector enters the average,
// and its marginal law is the overlap-weighted sphere measure, so each shot
// costs O(d): draw a spectral component of the target, an overlap
// p ~ Beta(2, d-1) with it, and a Haar direction in its complement.  The
// estimate is clipped to the state set; pure mode keeps the top eigenvector.
inline FockDensity random_basis_tomography(const FockDensity& sigma,
                                           std::int64_t shots, bool pure,
                                           prng& gen) {
    if (shots < 1) throw pipeline_failure("random_basis_tomography: no copies");
    const int d = sigma.space.dim();

    Eigen::SelfAdjointEigenSolver<CMat> dec(sigma.rho);
    Vec lam0 = dec.eigenvalues().cwiseMax(0.0);
    const double lam_total = lam0.sum();
    if (lam_total < 1e-300)
        throw numerical_error("random_basis_tomography: degenerate outcome law");
    lam0 /= lam_total;

    const int chunk = 256;
    CMat accum = CMat::Zero(d, d);
    CMat block(d, std::min<std::int64_t>(chunk, shots));
    int filled = 0;
    CVec g(d);
    for (std::int64_t s = 0; s < shots; ++s) {
        const double uk = gen.uniform();
        double acc = 0.0;
        int comp = d - 1;
        for (int i = 0; i < d; ++i) {
            acc += lam0(i);
            if (uk < acc) {
                comp = i;
                break;
            }
        }
        const auto w = dec.eigenvectors().col(comp);
        if (d == 1) {
            block.col(filled++) = w;
        } else {
            for (int i = 0; i < d; ++i)
                g(i) = std::complex<double>(gen.normal(), gen.normal());
            const double x = gen.exponential() + gen.exponential();
            double y = 0.0;
            for (int i = 1; i < d; ++i) y += gen.exponential();
            const double p = x / (x + y);
            const double ang = 6.283185307179586476925286766559 * gen.uniform();
            g -= w * w.dot(g);
            const double gn = g.norm();
            if (gn < 1e-300)
                throw numerical_error("random_basis_tomography: degenerate draw");
            block.col(filled++) =
                (std::complex<double>(std::cos(ang), std::sin(ang)) *
                 std::sqrt(p)) * w +
                (std::sqrt(1.0 - p) / gn) * g;
        }
        if (filled == block.cols()) {
            accum.noalias() += block * block.adjoint();
            filled = 0;
        }
    }
    if (filled > 0)
        accum.noalias() +=
            block.leftCols(filled) * block.leftCols(filled).adjoint();
    CMat raw = (d + 1.0) * (accum / double(shots)) -
               CMat::Identity(d, d);
    raw = 0.5 * (raw + raw.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMat> es(raw);
    if (pure) {
        const CVec top = es.eigenvectors().col(d - 1);
        return from_pure(sigma.space, top);
    }
    Vec lam = es.eigenvalues().cwiseMax(0.0);
    const double total = lam.sum();
    if (total < 1e-300)
        throw numerical_error("random_basis_tomography: estimate collapsed");
    lam /= total;
    CMat out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
    return {sigma.space, 0.5 * (out + out.adjoint()), 0.0};
}

struct GaussianCounts {
    double copies;  // (n+3) * ceil(inner)
    double inner;   // pre-ceiling per-round factor
    bool saturated;
};

// Formula-sized copy counts for Gaussian-state tomography; `pure` swaps the
// trailing 2^14 E^2 n^4 factor for 16 E^2 n^2.
inline GaussianCounts gaussian_sample_counts(int n, double eps, double delta,
                                             double e_budget, bool pure) {
    if (n < 1) throw numerical_error("gaussian_sample_counts: n out of range");
    if (!(eps > 0.0) || eps >= 1.0 || !(delta > 0.0) || delta >= 1.0)
        throw numerical_error("gaussian_sample_counts: eps, delta out of range");
    if (!(e_budget >= 0.5))
        throw numerical_error("gaussian_sample_counts: energy budget below vacuum");
    const long double e2 = static_cast<long double>(e_budget) * e_budget;
    const long double nn = static_cast<long double>(n);
    const long double tail = pure ? 16.0L * e2 * nn * nn
                                  : 16384.0L * e2 * nn * nn * nn * nn;
    const long double eps4 = powl(static_cast<long double>(eps), 4.0L);
    const long double inner = 68.0L * moment_log_term(n, delta) * 200.0L *
                              (24.0L * nn * nn * e2 + 3.0L * nn) / eps4 * tail;
    const long double copies = (nn + 3.0L) * ceill(inner);
    if (copies > 1.7e308L)
        return {std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(), true};
    return {static_cast<double>(copies), static_cast<double>(inner), false};
}

struct GaussianPipelineOptions {
    std::optional<std::int64_t> copies;  // explicit budget; formula-sized otherwise
    bool exact_expectations = false;
    bool pure = false;  // pure-state internal accuracy eps^2/(4nE)
};

// Gaussian-state learner: homodyne moment estimation at an internal accuracy
// tied to the trace-distance target, then the Gaussian state with the
// regularized moments.  With an explicit copy budget the internal accuracy is
// implied by inverting the sample-count formula and the covariance shift is
// the minimal physical one; the implied trace-distance bound is reported
// unclipped in the diagnostics.
inline TomographyReport gaussian_tomography(StateSource& source, int n,
                                            double eps, double delta,
                                            double e_budget, prng& gen,
                                            const GaussianPipelineOptions& opts = {}) {
    if (n < 1 || source.moments().n != n)
        throw numerical_error("gaussian_tomography: mode count mismatch");
    if (!(eps > 0.0) || eps >= 1.0 || !(delta > 0.0) || delta >= 1.0)
        throw numerical_error("gaussian_tomography: eps, delta out of range");
    if (!(e_budget >= 0.5))
        throw numerical_error("gaussian_tomography: energy budget below vacuum");
    const double energy = mean_energy(source.moments());
    if (energy > n * e_budget * (1.0 + 1e-9))
        throw numerical_error(
            "gaussian_tomography: source energy " + std::to_string(energy) +
            " exceeds declared budget " + std::to_string(n * e_budget));

    const double e2 = std::sqrt(3.0) * e_budget;  // second-moment bound sqrt(Tr E^2) <= n E2
    const std::int64_t before = source.copies_consumed();

    double eps_prime = 0.0;
    MomentOptions mopts;
    if (opts.copies) {
        if (*opts.copies < 1)
            throw numerical_error("gaussian_tomography: empty copy budget");
        const double per_round =
            static_cast<double>(*opts.copies) / (n + 3);
        eps_prime = std::sqrt(68.0 * moment_log_term(n, delta) * 200.0 *
                              (24.0 * n * n * e_budget * e_budget + 3.0 * n) /
                              per_round);
        mopts.copies = *opts.copies;
        mopts.shift_rule = ShiftRule::minimal;
    } else {
        eps_prime = opts.pure ? eps * eps / (4.0 * n * e_budget)
                              : eps * eps / (128.0 * e_budget * n * n);
        mopts.shift_rule = ShiftRule::half_epsilon;
        if (opts.exact_expectations) {
            mopts.exact_expectations = true;
        } else {
            const GaussianCounts gc =
                gaussian_sample_counts(n, eps, delta, e_budget, opts.pure);
            if (gc.saturated || gc.copies > 1e8)
                throw numerical_error(
                    "gaussian_tomography: formula-sized budget is infeasible "
                    "here; supply an explicit copy budget");
            mopts.copies = static_cast<std::int64_t>(gc.copies);
        }
    }

    const MomentEstimate est =
        estimate_moments(source, eps_prime, delta, e2, gen, mopts);

    TomographyReport rep;
    rep.estimator = GaussianState{n, est.m_tilde, est.V_prime};
    rep.copies_used = source.copies_consumed() - before;
    rep.eps_target = eps;
    rep.delta_target = delta;
    rep.diagnostics["epsilon_prime"] = eps_prime;
    rep.diagnostics["covariance_shift"] = est.shift;
    rep.diagnostics["uncertainty_ok"] = est.uncertainty_ok ? 1.0 : 0.0;
    rep.diagnostics["theory_distance_bound"] =
        std::sqrt(128.0 * e_budget * n * n * eps_prime);
    return rep;
}

// Moment-constrained learner: energy-projector filter at the truncation
// implied by the photon-moment budget, then random-basis tomography of the
// retained state.
inline TomographyReport moment_constrained_tomography(
    const FockDensity& truth, int n, int k, double eps, double delta,
    double nphot, bool pure, std::int64_t copies, prng& gen) {
    if (truth.space.modes() != n)
        throw numerical_error("moment_constrained_tomography: mode count mismatch");
    if (k < 1 || !(eps > 0.0) || eps >= 1.0 || !(delta > 0.0) || delta >= 1.0 ||
        !(nphot > 0.0))
        throw numerical_error("moment_constrained_tomography: bad parameters");
    if (copies < 1)
        throw numerical_error("moment_constrained_tomography: empty copy budget");

    const long long m_raw = static_cast<long long>(
        ceill(n * static_cast<long double>(nphot) /
              powl(static_cast<long double>(eps) / 2.0L, 2.0L / k)));
    const int m_eff =
        static_cast<int>(std::min<long long>(m_raw, truth.space.cutoff()));

    FockDensity sigma = truth;
    double retention = 1.0;
    if (m_eff < truth.space.cutoff()) {
        double kept = 0.0;
        for (int i = 0; i < truth.space.dim(); ++i)
            if (truth.space.grade(i) <= m_eff) kept += truth.rho(i, i).real();
        if (kept < 1e-12)
            throw pipeline_failure("moment_constrained_tomography: filter starved");
        auto [projected, weight] = project_energy_subspace(truth, m_eff);
        sigma = std::move(projected);
        retention = weight;
    }

    const std::int64_t retained = detail::binomial_draw(gen, copies, retention);
    if (retained == 0)
        throw pipeline_failure("moment_constrained_tomography: filter starved");

    const FockDensity est =
        random_basis_tomography(sigma, retained, pure, gen);

    TomographyReport rep;
    rep.estimator = est;
    rep.copies_used = copies;
    rep.eps_target = eps;
    rep.delta_target = delta;
    rep.diagnostics["projector_cutoff"] = static_cast<double>(m_raw);
    rep.diagnostics["retention_expected"] = retention;
    rep.diagnostics["retained_fraction"] =
        static_cast<double>(retained) / static_cast<double>(copies);
    rep.diagnostics["gentle_measurement_bound"] =
        std::sqrt(std::max(0.0, 1.0 - retention));
    rep.diagnostics["inner_dimension"] = static_cast<double>(sigma.space.dim());
    if (rep.diagnostics["retained_fraction"] < 0.5)
        rep.diagnostics["budget_violation_suspected"] = 1.0;
    return rep;
}

// Count of symplectic eigenvalues at the vacuum value.
inline int gaussian_dimension(const Mat& v, double tol = 1e-6) {
    const Vec d = williamson(v).d;
    int count = 0;
    for (int i = 0; i < d.size(); ++i)
        if (std::abs(d(i) - 1.0) <= tol) ++count;
    return count;
}

// Build the pure state D_m U_S (|head> (x) |0>^(n-h)) on an n-mode space.
// The head vector lives on its own h-mode space; h = 0 means a Gaussian
// state U|0>.  Returns the normalized state and the truncation deficit.
inline FockDensity assemble_doped_state(const FockSpace& space, int head_modes,
                                        const CVec& head, int head_cutoff,
                                        const Mat& S, const Vec& m) {
    const int n = space.modes();
    if (head_modes < 0 || head_modes > n)
        throw numerical_error("assemble_doped_state: head mode count out of range");
    CVec psi0 = CVec::Zero(space.dim());
    if (head_modes == 0) {
        psi0(space.index_of(std::vector<int>(n, 0))) = 1.0;
    } else {
        FockSpace hs(head_modes, head_cutoff);
        if (head.size() != hs.dim())
            throw numerical_error("assemble_doped_state: head dimension mismatch");
        for (int i = 0; i < hs.dim(); ++i) {
            std::vector<int> full(n, 0);
            const std::vector<int>& hk = hs.state(i);
            for (int a = 0; a < head_modes; ++a) full[a] = hk[a];
            psi0(space.index_of(full)) = head(i);
        }
        psi0 /= psi0.norm();
    }
    GaussianUnitaryOptions uopts;
    uopts.check_leakage = false;
    const CMat u = gaussian_unitary_matrix(space, S, m, uopts);
    const CVec psi = u * psi0;
    const double weight = psi.squaredNorm();
    if (weight < 0.5)
        throw numerical_error(
            "assemble_doped_state: truncation lost most of the state; raise the cutoff");
    FockDensity out = from_pure(space, psi);
    out.deficit = 1.0 - weight;
    return out;
}

struct DopedSynthesis {
    FockDensity state{FockSpace(1, 0), CMat::Ones(1, 1), 0.0};
    CompressedEstimate truth;
};

struct DopedSynthesisOptions {
    int head_grade = 3;        // highest Fock grade in the head superposition
    double head_decay = 0.6;   // amplitude scale per grade
    double z_max = 1.3;        // squeezing range of the random frame
    double mean_scale = 0.25;  // displacement scale
    double deficit_target = 1e-10;
    int max_cutoff = 60;
};

// Random state of the form G (|phi> (x) |0>^(n - kappa t)) with a random
// non-Gaussian head on kappa*t modes and a random Gaussian frame, plus its
// exact decomposition.  The energy cap bounds the mean energy of the output.
inline DopedSynthesis synth_t_doped(int n, int t, int kappa, prng& gen,
                                    double energy_cap,
                                    const DopedSynthesisOptions& opts = {}) {
    if (n < 1 || t < 0 || (t > 0 && kappa < 1))
        throw numerical_error("synth_t_doped: bad parameters");
    const int h = t * std::max(kappa, 0);
    if (h > n)
        throw numerical_error("synth_t_doped: head would cover more than n modes");
    if (!(energy_cap > 0.5 * n))
        throw numerical_error("synth_t_doped: energy cap below the vacuum");

    // Head on its own space, grades <= head_grade with geometric decay.
    CVec head;
    FockSpace head_space(std::max(h, 1), h > 0 ? opts.head_grade : 0);
    Mat v0 = Mat::Identity(2 * n, 2 * n);
    for (int attempt = 0;; ++attempt) {
        if (attempt > 50)
            throw numerical_error("synth_t_doped: energy cap too tight for the ranges");
        if (h > 0) {
            head = CVec(head_space.dim());
            for (int i = 0; i < head_space.dim(); ++i) {
                const double scale = std::pow(opts.head_decay, head_space.grade(i));
                head(i) = std::complex<double>(scale * gen.normal(),
                                               scale * gen.normal());
            }
            head /= head.norm();
            // quadrature products reach two grades past the head support, so
            // take the head moments on an enlarged copy of its space
            FockSpace meas(h, opts.head_grade + 4);
            CVec padded = CVec::Zero(meas.dim());
            for (int i = 0; i < head_space.dim(); ++i)
                padded(meas.index_of(head_space.state(i))) = head(i);
            StateSource hsrc(from_pure(meas, padded));
            v0.topLeftCorner(2 * h, 2 * h) = hsrc.moments().V;
        }
        const Mat S = random_symplectic(n, opts.z_max, gen);
        Vec m(2 * n);
        for (int i = 0; i < 2 * n; ++i) m(i) = opts.mean_scale * gen.normal();
        const Mat v = symmetrized(S * v0 * S.transpose());
        const double energy = 0.25 * (v.trace() + m.squaredNorm());
        if (energy > energy_cap) continue;

        // grow the cutoff until the synthesized vector is faithful
        int cutoff = std::max(
            8, static_cast<int>(std::ceil(3.0 * (energy - 0.5 * n) + 14.0)));
        for (;;) {
            FockSpace space(n, std::min(cutoff, opts.max_cutoff));
            FockDensity psi = assemble_doped_state(space, h, head,
                                                   h > 0 ? opts.head_grade : 0, S, m);
            if (psi.deficit <= opts.deficit_target) {
                DopedSynthesis out;
                out.state = std::move(psi);
                out.truth.n = n;
                out.truth.t = h;
                out.truth.m_tilde = m;
                out.truth.s_tilde = S;
                out.truth.head = h > 0 ? from_pure(head_space, head)
                                       : FockDensity{FockSpace(1, 0),
                                                     CMat::Ones(1, 1), 0.0};
                return out;
            }
            if (cutoff >= opts.max_cutoff)
                throw numerical_error(
                    "synth_t_doped: cutoff budget exhausted at deficit " +
                    std::to_string(psi.deficit));
            cutoff = std::min(opts.max_cutoff,
                              static_cast<int>(std::ceil(cutoff * 1.35)) + 2);
        }
    }
}

// Rebuild the density matrix described by a compressed estimate on the given
// space: D_m U_S (head (x) vacuum) D_m^dag U_S^dag via the head's spectral
// decomposition.
inline FockDensity reconstruct_compressed(const CompressedEstimate& est,
                                          const FockSpace& space) {
    if (space.modes() != est.n)
        throw numerical_error("reconstruct_compressed: mode count mismatch");
    if (est.t < 0 || est.t > est.n)
        throw numerical_error("reconstruct_compressed: head mode count out of range");
    GaussianUnitaryOptions uopts;
    uopts.check_leakage = false;
    const CMat u = gaussian_unitary_matrix(space, est.s_tilde, est.m_tilde, uopts);

    const int d = space.dim();
    CMat rho = CMat::Zero(d, d);
    double weight = 0.0;
    if (est.t == 0) {
        CVec psi0 = CVec::Zero(d);
        psi0(space.index_of(std::vector<int>(est.n, 0))) = 1.0;
        const CVec psi = u * psi0;
        weight = psi.squaredNorm();
        rho = psi * psi.adjoint();
    } else {
        if (est.head.space.modes() != est.t)
            throw numerical_error("reconstruct_compressed: head space mismatch");
        Eigen::SelfAdjointEigenSolver<CMat> es(est.head.rho);
        for (int a = 0; a < es.eigenvalues().size(); ++a) {
            const double lam = es.eigenvalues()(a);
            if (lam < 1e-12) continue;
            CVec psi0 = CVec::Zero(d);
            for (int i = 0; i < est.head.space.dim(); ++i) {
                const std::complex<double> c = es.eigenvectors()(i, a);
                if (std::abs(c) < 1e-300) continue;
                std::vector<int> full(est.n, 0);
                const std::vector<int>& hk = est.head.space.state(i);
                for (int b = 0; b < est.t; ++b) full[b] = hk[b];
                psi0(space.index_of(full)) = c;
            }
            const CVec psi = u * psi0;
            weight += lam * psi.squaredNorm();
            rho += lam * (psi * psi.adjoint());
        }
    }
    if (weight < 1e-12)
        throw numerical_error("reconstruct_compressed: reconstruction vanished");
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return {space, rho / rho.trace().real(), 1.0 - weight};
}

struct TCompressibleOptions {
    double moment_fraction = 0.5;       // budget share of the moment stage
    double post_selection_floor = 0.25;
    // Exact-parameter shortcut: skip stage 1 and use this frame directly.
    std::optional<std::pair<Vec, Mat>> frame_override;
};

// Learner for pure states whose non-Gaussianity fits in the first t modes of
// some Gaussian frame.  Stages: homodyne moment estimation, Williamson
// decomposition of the estimated covariance, per-copy inverse-frame rotation
// with a vacuum check on the tail modes, then pure-state tomography of the
// surviving head.
inline TomographyReport t_compressible_tomography(
    const FockDensity& truth, int n, int t, double eps, double delta,
    double e2_budget, std::int64_t copies, prng& gen,
    const TCompressibleOptions& opts = {}) {
    if (truth.space.modes() != n)
        throw numerical_error("t_compressible_tomography: mode count mismatch");
    if (t < 1 || t > n)
        throw numerical_error("t_compressible_tomography: need 1 <= t <= n");
    if (!(eps > 0.0) || eps >= 1.0 || !(delta > 0.0) || delta >= 1.0)
        throw numerical_error("t_compressible_tomography: eps, delta out of range");
    if (copies < 2)
        throw numerical_error("t_compressible_tomography: empty copy budget");
    const double e2_observed = std::sqrt(fock_energy_second_moment(truth));
    if (e2_observed > n * e2_budget * (1.0 + 1e-9))
        throw numerical_error("t_compressible_tomography: second-moment budget " +
                              std::to_string(n * e2_budget) + " exceeded by " +
                              std::to_string(e2_observed));

    const double eps_cov =
        eps * eps / (2.0 * (n + 1) * std::pow(1.0 + 4.0 * n * e2_budget, 2));
    const double eps_tom = eps / 2.0;

    TomographyReport rep;
    rep.eps_target = eps;
    rep.delta_target = delta;
    rep.copies_used = copies;
    rep.diagnostics["epsilon_cov"] = eps_cov;
    rep.diagnostics["epsilon_tom"] = eps_tom;

    // Stage 1: moments of the Gaussian frame.
    Vec m_tilde;
    Mat s_tilde;
    std::int64_t n_moment = 0;
    if (opts.frame_override) {
        m_tilde = opts.frame_override->first;
        s_tilde = opts.frame_override->second;
        if (!is_symplectic(s_tilde))
            throw numerical_error("t_compressible_tomography: override frame not symplectic");
    } else {
        n_moment = static_cast<std::int64_t>(
            static_cast<double>(copies) * opts.moment_fraction);
        if (n_moment < 1)
            throw numerical_error("t_compressible_tomography: moment stage starved");
        StateSource source(truth);
        MomentOptions mopts;
        mopts.copies = n_moment;
        mopts.shift_rule = ShiftRule::minimal;
        const MomentEstimate est = estimate_moments(
            source, eps_cov, delta / 3.0, e2_budget, gen, mopts);
        m_tilde = est.m_tilde;
        // Stage 2: Williamson gives the frame symplectic.
        s_tilde = williamson(est.V_prime).S;
        rep.diagnostics["covariance_shift"] = est.shift;
    }
    rep.diagnostics["moment_copies"] = static_cast<double>(n_moment);

    // Stage 3: rotate back by the estimated frame and post-select on a tail
    // vacuum outcome.
    GaussianUnitaryOptions uopts;
    uopts.check_leakage = false;
    const CMat u = gaussian_unitary_matrix(truth.space, s_tilde, m_tilde, uopts);
    CMat back = u.adjoint() * truth.rho * u;
    back = 0.5 * (back + back.adjoint()).eval();
    const double back_trace = back.trace().real();
    if (back_trace < 0.5)
        throw numerical_error("t_compressible_tomography: frame rotation left the space");
    FockDensity rotated{truth.space, back / back_trace, 1.0 - back_trace};

    const std::int64_t n_select = copies - n_moment;
    double p_succ = 1.0;
    FockDensity head = rotated;
    if (t < n) {
        std::vector<int> tail;
        for (int j = t; j < n; ++j) tail.push_back(j);
        auto [prob, post] = vacuum_projector_measurement(rotated, tail);
        p_succ = prob;
        head = std::move(post);
    }
    const std::int64_t survivors =
        p_succ >= 1.0 ? n_select : detail::binomial_draw(gen, n_select, p_succ);
    const double rate = n_select > 0
                            ? static_cast<double>(survivors) /
                                  static_cast<double>(n_select)
                            : 0.0;
    rep.diagnostics["post_selection_probability"] = p_succ;
    rep.diagnostics["post_selection_rate"] = rate;
    if (rate < opts.post_selection_floor)
        throw pipeline_failure(
            "t_compressible_tomography: post-selection rate " +
            std::to_string(rate) + " below floor " +
            std::to_string(opts.post_selection_floor) +
            "; the moment estimate is suspect");

    // Stage 4: trim the head support to the observed weight and learn the
    // pure head state.
    const double head_bound = 80.0 * n * n * e2_budget * e2_budget;
    rep.diagnostics["head_energy_bound"] = head_bound;
    rep.diagnostics["head_energy_observed"] = fock_mean_energy(head);

    Vec grade_weight = Vec::Zero(head.space.cutoff() + 1);
    for (int i = 0; i < head.space.dim(); ++i)
        grade_weight(head.space.grade(i)) += head.rho(i, i).real();
    double cum = 0.0;
    int trim = head.space.cutoff();
    for (int g = 0; g <= head.space.cutoff(); ++g) {
        cum += grade_weight(g);
        if (cum >= 1.0 - 1e-6) {
            trim = std::min(g + 2, head.space.cutoff());
            break;
        }
    }
    auto [head_trimmed, head_weight] = project_energy_subspace(head, trim);
    rep.diagnostics["head_trim_cutoff"] = static_cast<double>(trim);
    rep.diagnostics["head_trim_weight"] = head_weight;
    rep.diagnostics["inner_dimension"] =
        static_cast<double>(head_trimmed.space.dim());

    const FockDensity inner = random_basis_tomography(
        head_trimmed, survivors, /*pure=*/true, gen);

    CompressedEstimate est;
    est.n = n;
    est.t = t;
    est.m_tilde = m_tilde;
    est.s_tilde = s_tilde;
    est.head = inner;
    rep.estimator = std::move(est);
    return rep;
}

// Oracle evaluation of a report against the true density matrix; stores and
// returns the exact trace distance.
inline double stamp_oracle_distance(TomographyReport& rep,
                                    const FockDensity& truth) {
    double dist = 0.0;
    if (std::holds_alternative<GaussianState>(rep.estimator)) {
        const FockDensity est = gaussian_density_matrix(
            truth.space, std::get<GaussianState>(rep.estimator));
        dist = trace_distance_exact(est, truth);
    } else if (std::holds_alternative<FockDensity>(rep.estimator)) {
        dist = trace_distance_embedded(std::get<FockDensity>(rep.estimator), truth);
    } else {
        const FockDensity est = reconstruct_compressed(
            std::get<CompressedEstimate>(rep.estimator), truth.space);
        dist = trace_distance_exact(est, truth);
    }
    rep.achieved_distance = dist;
    return dist;
}

inline json fock_density_to_json(const FockDensity& rho) {
    const int d = rho.space.dim();
    json re = json::array(), im = json::array();
    for (int i = 0; i < d; ++i) {
        json row_re = json::array(), row_im = json::array();
        for (int j = 0; j < d; ++j) {
            row_re.push_back(rho.rho(i, j).real());
            row_im.push_back(rho.rho(i, j).imag());
        }
        re.push_back(std::move(row_re));
        im.push_back(std::move(row_im));
    }
    return json{{"modes", rho.space.modes()},
                {"cutoff", rho.space.cutoff()},
                {"deficit", rho.deficit},
                {"rho_re", std::move(re)},
                {"rho_im", std::move(im)}};
}

inline json compressed_estimate_to_json(const CompressedEstimate& est) {
    json out{{"n", est.n},
             {"t", est.t},
             {"mean", vec_to_json(est.m_tilde)},
             {"symplectic", mat_to_json(est.s_tilde)},
             {"head", fock_density_to_json(est.head)}};
    // convenient amplitude form when the head is (numerically) pure
    Eigen::SelfAdjointEigenSolver<CMat> es(est.head.rho);
    const int d = est.head.space.dim();
    if (d > 0 && es.eigenvalues()(d - 1) > 1.0 - 1e-9) {
        json re = json::array(), im = json::array();
        for (int i = 0; i < d; ++i) {
            re.push_back(es.eigenvectors()(i, d - 1).real());
            im.push_back(es.eigenvectors()(i, d - 1).imag());
        }
        out["head_vector_re"] = std::move(re);
        out["head_vector_im"] = std::move(im);
    }
    return out;
}

inline json tomography_report_to_json(const TomographyReport& rep) {
    json out{{"copies_used", rep.copies_used},
             {"eps_target", rep.eps_target},
             {"delta_target", rep.delta_target}};
    if (rep.achieved_distance) out["achieved_distance"] = *rep.achieved_distance;
    json diag;
    for (const auto& [key, value] : rep.diagnostics) diag[key] = value;
    out["diagnostics"] = std::move(diag);
    if (std::holds_alternative<GaussianState>(rep.estimator)) {
        out["estimator_type"] = "gaussian";
        out["estimator"] = state_to_json(std::get<GaussianState>(rep.estimator));
    } else if (std::holds_alternative<FockDensity>(rep.estimator)) {
        out["estimator_type"] = "fock";
        out["estimator"] = fock_density_to_json(std::get<FockDensity>(rep.estimator));
    } else {
        out["estimator_type"] = "compressed";
        out["estimator"] =
            compressed_estimate_to_json(std::get<CompressedEstimate>(rep.estimator));
    }
    return out;
}

}  // namespace cvtomo
