#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "cvtomo/errors.hpp"

namespace cvtomo {

// g(x) = (x+1) log2(x+1) - x log2(x), extended by continuity at 0.
inline double bosonic_entropy(double x) {
    if (!(x >= 0.0)) throw numerical_error("bosonic_entropy: negative argument");
    if (x == 0.0) return 0.0;
    return (x + 1.0) * std::log2(x + 1.0) - x * std::log2(x);
}

inline double binary_entropy(double x) {
    if (!(x >= 0.0) || !(x <= 1.0))
        throw numerical_error("binary_entropy: argument outside [0,1]");
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

struct BoundQuery {
    int n = 1;
    int k = 1;
    double eps = 0.1;
    double delta = 0.1;
    double budget = 1.0;  // photon number or energy per the formula's convention
    std::optional<int> t;
    std::optional<int> kappa;
};

// Occupation bound and dimension of the energy-truncated support, plus the
// closed-form ceiling (e budget / eps^{2/k} + 2e)^n.  `count` saturates to
// infinity past double range and sets the flag.
struct DimensionBound {
    long long occupation;  // the grade cutoff m
    double count;          // exact binomial C(m+n, n)
    double ceiling;
    bool saturated;
};

namespace detail {

inline void check_query(int n, int k, double eps, double budget) {
    if (n < 1 || n > 64) throw numerical_error("complexity: n out of range");
    if (k < 1) throw numerical_error("complexity: k must be at least 1");
    if (!(eps > 0.0) || eps >= 1.0)
        throw numerical_error("complexity: eps must lie in (0,1)");
    if (!(budget > 0.0)) throw numerical_error("complexity: budget must be positive");
}

inline DimensionBound dimension_from_scale(int n, double scale) {
    DimensionBound out{};
    const long double m_real = ceill(static_cast<long double>(n) * scale);
    if (m_real > 9.0e18) {
        out.occupation = std::numeric_limits<long long>::max();
        out.count = std::numeric_limits<double>::infinity();
        out.saturated = true;
    } else {
        out.occupation = static_cast<long long>(m_real);
        long double c = 1.0L;
        for (int i = 1; i <= n; ++i)
            c *= static_cast<long double>(out.occupation + i) / i;
        if (c > 1.7e308L) {
            out.count = std::numeric_limits<double>::infinity();
            out.saturated = true;
        } else {
            out.count = static_cast<double>(c);
        }
    }
    const long double e = expl(1.0L);
    const long double ceil_base = e * scale + 2.0L * e;
    const long double ceil_val = powl(ceil_base, n);
    out.ceiling = (ceil_val > 1.7e308L) ? std::numeric_limits<double>::infinity()
                                        : static_cast<double>(ceil_val);
    return out;
}

}  // namespace detail

inline DimensionBound effective_dimension(int n, int k, double eps, double nphot) {
    detail::check_query(n, k, eps, nphot);
    return detail::dimension_from_scale(
        n, static_cast<double>(nphot / powl(static_cast<long double>(eps), 2.0L / k)));
}

inline DimensionBound effective_rank(int n, int k, double eps, double nphot) {
    detail::check_query(n, k, eps, nphot);
    return detail::dimension_from_scale(
        n, static_cast<double>(nphot / powl(static_cast<long double>(eps), 1.0L / k)));
}

namespace detail {

inline void check_delta(double delta) {
    if (!(delta > 0.0) || !(delta < 1.0))
        throw numerical_error("complexity: delta must lie in (0,1)");
}

const long double kLog2_32pi = 6.6514961294723187980432792951080L;  // log2(32 pi)

}  // namespace detail

// Copy-count floor for pure-state tomography under a k-th moment constraint,
// clamped below at one copy.
inline double lower_bound_pure(int n, int k, double eps, double delta,
                               double nphot) {
    detail::check_query(n, k, eps, nphot);
    detail::check_delta(delta);
    const long double base =
        nphot / powl(12.0L * eps, 2.0L / k) - 1.0L / n;
    if (base <= 0.0L) return 1.0;
    const long double lead = 2.0L * (1.0L - delta) * powl(base, n);
    const long double num = lead - (1.0L - delta) * detail::kLog2_32pi -
                            static_cast<long double>(binary_entropy(delta));
    const long double den = n * static_cast<long double>(bosonic_entropy(nphot));
    const long double val = num / den;
    if (val > 1.7e308L) return std::numeric_limits<double>::infinity();
    return std::max(1.0, static_cast<double>(val));
}

inline double lower_bound_mixed(int n, int k, double eps, double delta,
                                double nphot) {
    detail::check_query(n, k, eps, nphot);
    detail::check_delta(delta);
    const long double base = nphot / powl(16.0L * eps, 1.0L / k) - 1.0L / n;
    if (base <= 0.0L) return 1.0;
    const long double lead = (1.0L - delta) * powl(base, 2 * n);
    const long double num = lead - 0.5L * (1.0L - delta) -
                            2.0L * static_cast<long double>(binary_entropy(delta));
    const long double den = 2.0L * n * static_cast<long double>(bosonic_entropy(nphot));
    const long double val = num / den;
    if (val > 1.7e308L) return std::numeric_limits<double>::infinity();
    return std::max(1.0, static_cast<double>(val));
}

// Same packing argument routed through the t-mode head of a compressible
// state; the budget is the mean-energy bound E with E > 1/2.
inline double lower_bound_t_compressible(int n, int t, double eps, double delta,
                                         double e_budget) {
    if (t < 1 || t > n) throw numerical_error("complexity: need 1 <= t <= n");
    detail::check_query(n, 1, eps, 1.0);
    detail::check_delta(delta);
    if (!(e_budget > 0.5))
        throw numerical_error("complexity: energy budget must exceed the vacuum");
    const long double arg =
        (static_cast<long double>(n) / t) * (e_budget - 0.5L);
    const long double base = arg / (12.0L * eps) - 1.0L / t;
    if (base <= 0.0L) return 1.0;
    const long double lead = 2.0L * (1.0L - delta) * powl(base, t);
    const long double num = lead - (1.0L - delta) * detail::kLog2_32pi -
                            static_cast<long double>(binary_entropy(delta));
    const long double den =
        t * static_cast<long double>(bosonic_entropy(static_cast<double>(arg)));
    const long double val = num / den;
    if (val > 1.7e308L) return std::numeric_limits<double>::infinity();
    return std::max(1.0, static_cast<double>(val));
}

struct CountBound {
    double count;
    bool saturated;
};

// Copy counts of the energy-truncated tomography algorithms:
// ceil(2^21 d_eff / eps^2 ln(4/delta)), times r_eff for mixed states.
inline CountBound upper_bound_counts(int n, int k, double eps, double delta,
                                     double nphot, bool pure) {
    detail::check_query(n, k, eps, nphot);
    detail::check_delta(delta);
    const DimensionBound d = effective_dimension(n, k, eps, nphot);
    long double factor = d.count;
    bool saturated = d.saturated;
    if (!pure) {
        const DimensionBound r = effective_rank(n, k, eps, nphot);
        factor *= r.count;
        saturated = saturated || r.saturated;
    }
    const long double val = ceill(2097152.0L * factor /
                                  (static_cast<long double>(eps) * eps) *
                                  logl(4.0L / delta));
    if (saturated || val > 1.7e308L)
        return {std::numeric_limits<double>::infinity(), true};
    return {static_cast<double>(val), false};
}

// Cross-checking twins of every evaluator above, assembled through a
// different arithmetic route (term-wise log-domain accumulation instead of
// direct products).  Kept deliberately separate so agreement between the two
// is evidence against transcription slips.
namespace alt {

inline double binomial_log_domain(long long m, int n) {
    long double acc = 0.0L;
    for (int i = 1; i <= n; ++i)
        acc += logl(static_cast<long double>(m + i)) - logl(static_cast<long double>(i));
    const long double v = expl(acc);
    return (v > 1.7e308L) ? std::numeric_limits<double>::infinity()
                          : static_cast<double>(v);
}

inline DimensionBound effective_dimension(int n, int k, double eps, double nphot) {
    DimensionBound d = cvtomo::effective_dimension(n, k, eps, nphot);
    if (!d.saturated) d.count = binomial_log_domain(d.occupation, n);
    const long double log_base =
        logl(expl(1.0L) * (nphot * expl((-2.0L / k) * logl(eps)) + 2.0L));
    const long double lv = n * log_base;
    d.ceiling = (lv > 709.0L) ? std::numeric_limits<double>::infinity()
                              : static_cast<double>(expl(lv));
    return d;
}

inline DimensionBound effective_rank(int n, int k, double eps, double nphot) {
    DimensionBound d = cvtomo::effective_rank(n, k, eps, nphot);
    if (!d.saturated) d.count = binomial_log_domain(d.occupation, n);
    const long double log_base =
        logl(expl(1.0L) * (nphot * expl((-1.0L / k) * logl(eps)) + 2.0L));
    const long double lv = n * log_base;
    d.ceiling = (lv > 709.0L) ? std::numeric_limits<double>::infinity()
                              : static_cast<double>(expl(lv));
    return d;
}

inline long double entropy_g(long double x) {
    const long double ln2 = logl(2.0L);
    return ((x + 1.0L) * logl(x + 1.0L) - x * logl(x)) / ln2;
}

inline long double entropy_h2(long double x) {
    if (x == 0.0L || x == 1.0L) return 0.0L;
    const long double ln2 = logl(2.0L);
    return (-x * logl(x) - (1.0L - x) * logl(1.0L - x)) / ln2;
}

inline double lower_bound_pure(int n, int k, double eps, double delta,
                               double nphot) {
    const long double base =
        nphot * expl((-2.0L / k) * logl(12.0L * eps)) - 1.0L / n;
    if (base <= 0.0L) return 1.0;
    const long double lead = 2.0L * (1.0L - delta) * expl(n * logl(base));
    const long double num = lead -
                            (1.0L - delta) * logl(32.0L * acosl(-1.0L)) / logl(2.0L) -
                            entropy_h2(delta);
    const long double val = num / (n * entropy_g(nphot));
    if (val > 1.7e308L) return std::numeric_limits<double>::infinity();
    return std::max(1.0, static_cast<double>(val));
}

inline double lower_bound_mixed(int n, int k, double eps, double delta,
                                double nphot) {
    const long double base =
        nphot * expl((-1.0L / k) * logl(16.0L * eps)) - 1.0L / n;
    if (base <= 0.0L) return 1.0;
    const long double lead = (1.0L - delta) * expl(2.0L * n * logl(base));
    const long double num = lead - 0.5L * (1.0L - delta) - 2.0L * entropy_h2(delta);
    const long double val = num / (2.0L * n * entropy_g(nphot));
    if (val > 1.7e308L) return std::numeric_limits<double>::infinity();
    return std::max(1.0, static_cast<double>(val));
}

inline double lower_bound_t_compressible(int n, int t, double eps, double delta,
                                         double e_budget) {
    const long double arg = (static_cast<long double>(n) / t) * (e_budget - 0.5L);
    const long double base = arg / (12.0L * eps) - 1.0L / t;
    if (base <= 0.0L) return 1.0;
    const long double lead = 2.0L * (1.0L - delta) * expl(t * logl(base));
    const long double num = lead -
                            (1.0L - delta) * logl(32.0L * acosl(-1.0L)) / logl(2.0L) -
                            entropy_h2(delta);
    const long double val = num / (t * entropy_g(arg));
    if (val > 1.7e308L) return std::numeric_limits<double>::infinity();
    return std::max(1.0, static_cast<double>(val));
}

inline CountBound upper_bound_counts(int n, int k, double eps, double delta,
                                     double nphot, bool pure) {
    const DimensionBound d = effective_dimension(n, k, eps, nphot);
    long double log_factor = logl(static_cast<long double>(d.count));
    bool saturated = d.saturated;
    if (!pure) {
        const DimensionBound r = effective_rank(n, k, eps, nphot);
        log_factor += logl(static_cast<long double>(r.count));
        saturated = saturated || r.saturated;
    }
    const long double lv = 21.0L * logl(2.0L) + log_factor -
                           2.0L * logl(static_cast<long double>(eps)) +
                           logl(logl(4.0L / delta));
    if (saturated || lv > 709.0L)
        return {std::numeric_limits<double>::infinity(), true};
    return {static_cast<double>(ceill(expl(lv))), false};
}

}  // namespace alt

}  // namespace cvtomo
