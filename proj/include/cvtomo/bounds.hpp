#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "cvtomo/errors.hpp"
#include "cvtomo/gaussian_state.hpp"
#include "cvtomo/json_io.hpp"
#include "cvtomo/linalg.hpp"
#include "cvtomo/symplectic.hpp"

namespace cvtomo {

// Prefactor of the mixed-state distance bound under a photon budget.
inline double f_of_N(double n_phot) {
    if (!(n_phot >= 0.0)) throw numerical_error("f_of_N: negative photon budget");
    return (std::sqrt(n_phot) + std::sqrt(n_phot + 1.0)) / std::sqrt(2.0);
}

namespace detail {

inline void require_same_shape(const GaussianState& a, const GaussianState& b) {
    if (a.n != b.n)
        throw numerical_error("distance bounds: mode counts differ");
}

inline void require_photon_budget(const GaussianState& s, double n_budget,
                                  const char* which) {
    const double nb = mean_photon_number(s);
    if (nb > n_budget * (1.0 + 1e-12) + 1e-12)
        throw numerical_error(std::string("photon budget violated: state ") + which +
                              " has mean photon number " + std::to_string(nb) +
                              " above the declared " + std::to_string(n_budget));
}

inline void require_energy_budget(const GaussianState& s, double e_budget,
                                  const char* which) {
    const double e = mean_energy(s);
    if (e > e_budget * (1.0 + 1e-12) + 1e-12)
        throw numerical_error(std::string("energy budget violated: state ") + which +
                              " has mean energy " + std::to_string(e) +
                              " above the declared " + std::to_string(e_budget));
}

}  // namespace detail

// Half trace distance bound for two states of mean photon number at most
// n_budget: f(N) (|dm| + sqrt(2) sqrt(|dV| trace norm)).  Often above 1, in
// which case it says nothing; callers clip.
inline double upper_bound_mixed(const GaussianState& s1, const GaussianState& s2,
                                double n_budget) {
    detail::require_same_shape(s1, s2);
    detail::require_photon_budget(s1, n_budget, "1");
    detail::require_photon_budget(s2, n_budget, "2");
    const double dm = (s1.m - s2.m).norm();
    const double dv = trace_norm(s1.V - s2.V);
    return f_of_N(n_budget) * (dm + std::sqrt(2.0) * std::sqrt(dv));
}

enum class PureBoundForm { trace_v, energy };

// Half trace distance bound against a pure Gaussian reference.  The trace_v
// form weighs by the reference's covariance trace; the energy form by a
// shared mean-energy budget.
inline double upper_bound_pure(const GaussianState& psi,
                               const GaussianState& rho_moments,
                               PureBoundForm form,
                               std::optional<double> e_budget = std::nullopt) {
    detail::require_same_shape(psi, rho_moments);
    const Vec d = symplectic_eigenvalues(psi.V);
    if ((d.array() - 1.0).abs().maxCoeff() > 1e-6)
        throw numerical_error("upper_bound_pure: reference state is not pure");
    const double dm2 = (psi.m - rho_moments.m).squaredNorm();
    const double dv = op_norm(psi.V - rho_moments.V);
    if (form == PureBoundForm::trace_v)
        return 0.5 * std::sqrt(psi.V.trace()) * std::sqrt(dv + 2.0 * dm2);
    if (!e_budget)
        throw numerical_error("upper_bound_pure: energy form needs a budget");
    detail::require_energy_budget(psi, *e_budget, "1");
    detail::require_energy_budget(rho_moments, *e_budget, "2");
    return std::sqrt(*e_budget) * std::sqrt(2.0 * dm2 + dv);
}

struct LowerBounds {
    double from_mean;
    double from_cov;
};

// Trace distance is at least (1/200) min{1, |dm| / sqrt(4E+1)} and at least
// (1/200) min{1, |dV|_HS / (4E+1)} under a shared mean-energy budget E.
inline LowerBounds lower_bounds(const GaussianState& s1, const GaussianState& s2,
                                double e_budget) {
    detail::require_same_shape(s1, s2);
    detail::require_energy_budget(s1, e_budget, "1");
    detail::require_energy_budget(s2, e_budget, "2");
    const double h = 4.0 * e_budget + 1.0;
    const double dm = (s1.m - s2.m).norm();
    const double dv = hs_norm(s1.V - s2.V);
    return {std::min(1.0, dm / std::sqrt(h)) / 200.0,
            std::min(1.0, dv / h) / 200.0};
}

struct BoundReport {
    double upper_mixed = 0.0;  // raw, may exceed 1
    std::optional<double> upper_pure;
    double lower_from_mean = 0.0;
    double lower_from_cov = 0.0;
    double photon_budget = 0.0;
    double energy_budget = 0.0;
};

inline double clipped_upper(const BoundReport& r) {
    double u = r.upper_mixed;
    if (r.upper_pure) u = std::min(u, *r.upper_pure);
    return std::min(1.0, u);
}

inline double best_lower(const BoundReport& r) {
    return std::max(r.lower_from_mean, r.lower_from_cov);
}

// Convenience wrapper: budgets taken as the max over the pair and recorded
// in the report.  The pure-reference bound (energy form) is included when
// either input is pure, preferring the first.
inline BoundReport bound_report(const GaussianState& s1, const GaussianState& s2) {
    detail::require_same_shape(s1, s2);
    BoundReport r;
    r.photon_budget = std::max(mean_photon_number(s1), mean_photon_number(s2));
    r.energy_budget = std::max(mean_energy(s1), mean_energy(s2));
    r.upper_mixed = upper_bound_mixed(s1, s2, r.photon_budget);
    const LowerBounds lo = lower_bounds(s1, s2, r.energy_budget);
    r.lower_from_mean = lo.from_mean;
    r.lower_from_cov = lo.from_cov;
    auto is_pure = [](const GaussianState& s) {
        const Vec d = symplectic_eigenvalues(s.V);
        return (d.array() - 1.0).abs().maxCoeff() <= 1e-6;
    };
    if (is_pure(s1))
        r.upper_pure = upper_bound_pure(s1, s2, PureBoundForm::energy, r.energy_budget);
    else if (is_pure(s2))
        r.upper_pure = upper_bound_pure(s2, s1, PureBoundForm::energy, r.energy_budget);
    return r;
}

inline json bound_report_to_json(const BoundReport& r) {
    json j{{"upper_mixed", r.upper_mixed},
           {"lower_from_mean", r.lower_from_mean},
           {"lower_from_cov", r.lower_from_cov},
           {"photon_budget", r.photon_budget},
           {"energy_budget", r.energy_budget},
           {"clipped_upper", clipped_upper(r)}};
    if (r.upper_pure) j["upper_pure"] = *r.upper_pure;
    return j;
}

}  // namespace cvtomo
