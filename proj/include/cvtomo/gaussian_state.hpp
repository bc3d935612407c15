#pragma once

#include <cmath>
#include <vector>

#include "cvtomo/errors.hpp"
#include "cvtomo/linalg.hpp"
#include "cvtomo/rng.hpp"
#include "cvtomo/symplectic.hpp"

namespace cvtomo {

// n-mode Gaussian state in moment form.  Conventions, fixed project-wide:
// quadratures interleaved (x_1, p_1, ...), vacuum covariance V = I (the
// factor-2 anticommutator definition), so a valid V satisfies V + i*Omega >= 0
// and all symplectic eigenvalues are >= 1.  Mean energy counts n/2 of vacuum
// energy: E = N_phot + n/2.
struct GaussianState {
    int n = 0;
    Vec m;  // 2n first moments
    Mat V;  // 2n x 2n covariance
};

namespace detail {

inline void check_shape(const GaussianState& s, const char* who) {
    if (s.n < 1 || s.m.size() != 2 * s.n || s.V.rows() != 2 * s.n ||
        s.V.cols() != 2 * s.n)
        throw numerical_error(std::string(who) + ": inconsistent state shape");
}

}  // namespace detail

inline bool validate(const GaussianState& s, double tol = 1e-8) {
    detail::check_shape(s, "validate");
    if (max_abs(s.V - s.V.transpose()) > tol) return false;
    return uncertainty_margin(s.V) >= -tol;
}

inline GaussianState vacuum(int n) {
    if (n < 1) throw numerical_error("vacuum: n must be positive");
    return {n, Vec::Zero(2 * n), Mat::Identity(2 * n, 2 * n)};
}

inline GaussianState thermal(const std::vector<double>& nu) {
    const int n = static_cast<int>(nu.size());
    if (n < 1) throw numerical_error("thermal: need at least one mode");
    GaussianState s = vacuum(n);
    for (int j = 0; j < n; ++j) {
        if (nu[j] < 0) throw numerical_error("thermal: negative occupation");
        s.V(2 * j, 2 * j) = s.V(2 * j + 1, 2 * j + 1) = 2.0 * nu[j] + 1.0;
    }
    return s;
}

inline GaussianState coherent(const Vec& r) {
    if (r.size() < 2 || r.size() % 2 != 0)
        throw numerical_error("coherent: displacement must have even length");
    GaussianState s = vacuum(static_cast<int>(r.size() / 2));
    s.m = r;
    return s;
}

inline double mean_energy(const GaussianState& s) {
    detail::check_shape(s, "mean_energy");
    return s.V.trace() / 4.0 + 0.5 * s.m.squaredNorm();
}

inline double mean_photon_number(const GaussianState& s) {
    detail::check_shape(s, "mean_photon_number");
    return (s.V.trace() - 2.0 * s.n) / 4.0 + 0.5 * s.m.squaredNorm();
}

// Second moment of the total energy.  Exact for Gaussian states; grows no
// faster than 3*mean_energy^2.
inline double energy_second_moment(const GaussianState& s) {
    detail::check_shape(s, "energy_second_moment");
    const double e = mean_energy(s);
    return e * e + (s.V * s.V).trace() / 8.0 +
           0.5 * s.m.dot(s.V * s.m) - s.n / 4.0;
}

// Moment action of the Gaussian unitary with symplectic part S and
// displacement d: m -> S m + d, V -> S V S^T.
inline GaussianState apply_gaussian_map(const GaussianState& s, const Mat& S,
                                        const Vec& d) {
    detail::check_shape(s, "apply_gaussian_map");
    if (S.rows() != 2 * s.n || d.size() != 2 * s.n)
        throw numerical_error("apply_gaussian_map: dimension mismatch");
    if (!is_symplectic(S))
        throw numerical_error("apply_gaussian_map: S is not symplectic");
    return {s.n, S * s.m + d, symmetrized(S * s.V * S.transpose())};
}

// Classical Gaussian noise channel: adds PSD K to the covariance.
inline GaussianState gaussian_noise(const GaussianState& s, const Mat& K) {
    detail::check_shape(s, "gaussian_noise");
    if (K.rows() != 2 * s.n || K.cols() != 2 * s.n)
        throw numerical_error("gaussian_noise: dimension mismatch");
    const Mat ks = symmetrized(K);
    Eigen::SelfAdjointEigenSolver<Mat> es(ks);
    if (es.eigenvalues().minCoeff() < -1e-8)
        throw numerical_error("gaussian_noise: K is not positive semidefinite");
    return {s.n, s.m, symmetrized(s.V + ks)};
}

// Marginal on the selected modes (indices 0-based, duplicates rejected).
inline GaussianState reduced_state(const GaussianState& s,
                                   const std::vector<int>& modes) {
    detail::check_shape(s, "reduced_state");
    if (modes.empty()) throw numerical_error("reduced_state: empty mode set");
    std::vector<bool> seen(s.n, false);
    for (int mode : modes) {
        if (mode < 0 || mode >= s.n || seen[mode])
            throw numerical_error("reduced_state: bad mode index");
        seen[mode] = true;
    }
    const int k = static_cast<int>(modes.size());
    GaussianState out;
    out.n = k;
    out.m = Vec(2 * k);
    out.V = Mat(2 * k, 2 * k);
    for (int a = 0; a < k; ++a) {
        out.m(2 * a) = s.m(2 * modes[a]);
        out.m(2 * a + 1) = s.m(2 * modes[a] + 1);
        for (int b = 0; b < k; ++b)
            out.V.block<2, 2>(2 * a, 2 * b) =
                s.V.block<2, 2>(2 * modes[a], 2 * modes[b]);
    }
    return out;
}

// Mean energy after displacing by r: E + r.m + ||r||^2/2 (exact identity).
inline double displacement_energy(const GaussianState& s, const Vec& r) {
    detail::check_shape(s, "displacement_energy");
    if (r.size() != 2 * s.n)
        throw numerical_error("displacement_energy: dimension mismatch");
    return mean_energy(s) + r.dot(s.m) + 0.5 * r.squaredNorm();
}

enum class Purity { pure, mixed };

// Random state below an energy cap.  Euler parts are drawn once, then the
// squeezing, thermal occupations and displacement are shrunk geometrically
// until the cap is met, so the draw count (and hence the stream position) is
// independent of the cap.
inline GaussianState random_gaussian_state(int n, double energy_cap,
                                           Purity purity, prng& g) {
    if (n < 1) throw numerical_error("random_gaussian_state: n must be positive");
    if (energy_cap < 0.5 * n)
        throw numerical_error("random_gaussian_state: cap below vacuum energy");

    const Mat o1 = detail::passive_from_unitary(detail::haar_unitary(n, g));
    const Mat o2 = detail::passive_from_unitary(detail::haar_unitary(n, g));
    std::vector<double> z(n), d(n);
    for (int j = 0; j < n; ++j) z[j] = 1.0 + 0.7 * g.uniform();
    for (int j = 0; j < n; ++j)
        d[j] = (purity == Purity::pure) ? 1.0 : 1.0 + g.uniform();
    Vec m(2 * n);
    for (int i = 0; i < 2 * n; ++i) m(i) = 0.7 * g.normal();

    GaussianState out;
    out.n = n;
    for (int iter = 0; iter < 300; ++iter) {
        Vec zdiag(2 * n), ddiag(2 * n);
        for (int j = 0; j < n; ++j) {
            zdiag(2 * j) = z[j];
            zdiag(2 * j + 1) = 1.0 / z[j];
            ddiag(2 * j) = ddiag(2 * j + 1) = d[j];
        }
        const Mat s = o1 * zdiag.asDiagonal() * o2;
        out.V = symmetrized(s * ddiag.asDiagonal() * s.transpose());
        out.m = m;
        if (mean_energy(out) <= energy_cap) return out;
        for (int j = 0; j < n; ++j) {
            z[j] = std::pow(z[j], 0.8);
            d[j] = 1.0 + 0.8 * (d[j] - 1.0);
        }
        m *= 0.8;
    }
    return vacuum(n);  // cap == n/2 up to rounding; the shrink loop stalls
}

}  // namespace cvtomo
