#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "cvtomo/errors.hpp"
#include "cvtomo/json_io.hpp"
#include "cvtomo/linalg.hpp"
#include "cvtomo/measurement.hpp"
#include "cvtomo/rng.hpp"
#include "cvtomo/symplectic.hpp"

namespace cvtomo {

// Median of K bin averages; samples beyond the last full bin are dropped.
inline double median_of_means(const std::vector<double>& samples, int k_bins) {
    if (samples.empty()) throw numerical_error("median_of_means: empty input");
    if (k_bins < 1) throw numerical_error("median_of_means: need K >= 1");
    const std::size_t bin = samples.size() / static_cast<std::size_t>(k_bins);
    if (bin == 0) throw numerical_error("median_of_means: more bins than samples");
    std::vector<double> means(k_bins);
    for (int b = 0; b < k_bins; ++b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < bin; ++i) acc += samples[b * bin + i];
        means[b] = acc / double(bin);
    }
    return median(std::move(means));
}

// Median-of-means tail-bound budget for one scalar mean: N = ceil(68 log(2/d)
// var / eps^2) samples split into K = ceil(2 log(2/d)) bins.
inline std::int64_t mom_plain_count(double eps, double delta, double variance) {
    if (!(eps > 0.0) || !(delta > 0.0) || delta >= 1.0 || !(variance >= 0.0))
        throw numerical_error("mom_plain_count: parameters out of range");
    return static_cast<std::int64_t>(
        std::ceil(68.0 * std::log(2.0 / delta) * variance / (eps * eps)));
}

inline int mom_plain_bins(double delta) {
    if (!(delta > 0.0) || delta >= 1.0)
        throw numerical_error("mom_plain_bins: delta out of range");
    return static_cast<int>(std::ceil(2.0 * std::log(2.0 / delta)));
}

// Union-bound failure split over the 2n^2 + 3n estimated quantities.
inline double moment_log_term(int n, double delta) {
    return std::log(2.0 * (2.0 * n * n + 3.0 * n) / delta);
}

// Total copy budget of the full moment-estimation schedule: n+3 rounds of
// ceil(68 L 200 (8 n^2 E2^2 + 3n) / eps^2) shots each.
inline std::int64_t moment_sample_count(int n, double eps, double delta,
                                        double e2) {
    if (n < 1) throw numerical_error("moment_sample_count: need n >= 1");
    if (!(eps > 0.0) || eps >= 1.0 || !(delta > 0.0) || delta >= 1.0)
        throw numerical_error("moment_sample_count: eps, delta must lie in (0,1)");
    if (!(e2 >= 0.5))
        throw numerical_error("moment_sample_count: second-moment budget below vacuum");
    const double variance_budget = 200.0 * (8.0 * n * n * e2 * e2 + 3.0 * n);
    const double per_round =
        std::ceil(68.0 * moment_log_term(n, delta) * variance_budget / (eps * eps));
    return static_cast<std::int64_t>(n + 3) * static_cast<std::int64_t>(per_round);
}

inline int mom_bins(int n, double delta) {
    return static_cast<int>(std::ceil(2.0 * moment_log_term(n, delta)));
}

struct MomentEstimate {
    Vec m_tilde;
    Mat V_tilde;   // raw moment assembly, possibly outside the state set
    Mat V_prime;   // regularized output
    double epsilon_target = 0.0;
    double delta_target = 0.0;
    std::int64_t samples_used = 0;
    bool uncertainty_ok = false;
    double shift = 0.0;  // multiple of the identity added to V_tilde
};

// Shifts V_tilde toward the state set.  A shift of eps/2 restores physicality
// whenever the raw estimate is within eps/2 of a true covariance; `minimal`
// instead measures the uncertainty deficit and shifts just past it (for
// fixed copy budgets with no target accuracy).
enum class ShiftRule { half_epsilon, minimal };

inline std::pair<Mat, double> regularized_covariance(const Mat& v_tilde,
                                                     double eps,
                                                     ShiftRule rule) {
    const Mat sym = symmetrized(v_tilde);
    double shift = 0.0;
    if (rule == ShiftRule::half_epsilon) {
        shift = 0.5 * eps;
    } else {
        const double margin = uncertainty_margin(sym);
        if (margin < 0.0) shift = -margin * (1.0 + 1e-10) + 1e-14;
    }
    return {sym + shift * Mat::Identity(sym.rows(), sym.cols()), shift};
}

struct MomentOptions {
    std::optional<std::int64_t> copies;  // override the formula budget
    bool exact_expectations = false;     // infinite-sample limit
    ShiftRule shift_rule = ShiftRule::half_epsilon;
    double psd_tol = 1e-9;
};

// Full moment-estimation schedule: n+3 joint-measurement rounds, one
// median-of-means estimate per first- and second-moment entry, assembly of
// W, V = W - 2 m m^T, and the regularizing shift.
inline MomentEstimate estimate_moments(StateSource& source, double eps,
                                       double delta, double e2, prng& gen,
                                       const MomentOptions& opts = {}) {
    const GaussianState& truth = source.moments();
    const int n = truth.n;
    if (!(eps > 0.0) || !(delta > 0.0) || delta >= 1.0)
        throw numerical_error("estimate_moments: eps, delta out of range");
    if (!(e2 >= 0.5))
        throw numerical_error("estimate_moments: second-moment budget below vacuum");

    MomentEstimate est;
    est.epsilon_target = eps;
    est.delta_target = delta;

    Vec m_t(2 * n);
    Mat w = Mat::Zero(2 * n, 2 * n);

    if (opts.exact_expectations) {
        m_t = truth.m;
        w = truth.V + 2.0 * truth.m * truth.m.transpose();
        est.samples_used = 0;
    } else {
        const auto plan = table2_sample_plan(n);
        std::int64_t per_round;
        if (opts.copies) {
            per_round = *opts.copies / static_cast<std::int64_t>(n + 3);
        } else {
            per_round = moment_sample_count(n, eps, delta, e2) /
                        static_cast<std::int64_t>(n + 3);
        }
        const int k_bins = mom_bins(n, delta);
        if (per_round < k_bins)
            throw numerical_error("estimate_moments: copy budget starves the bins");

        std::vector<double> buf(static_cast<std::size_t>(per_round));
        auto mom_of = [&](const SampleBatch& batch, int col_a, int col_b) {
            for (std::int64_t s = 0; s < per_round; ++s) {
                const Vec& shot = batch.shots[static_cast<std::size_t>(s)];
                buf[static_cast<std::size_t>(s)] =
                    (col_b < 0) ? shot(col_a) : shot(col_a) * shot(col_b);
            }
            return median_of_means(buf, k_bins);
        };

        for (int r = 0; r < static_cast<int>(plan.size()); ++r) {
            const SampleBatch batch =
                homodyne_joint_sample(source, plan[r], per_round, gen);
            if (r == 0) {  // positions: first moments and all x_i x_j
                for (int i = 0; i < n; ++i) m_t(2 * i) = mom_of(batch, i, -1);
                for (int i = 0; i < n; ++i)
                    for (int j = i; j < n; ++j) {
                        w(2 * i, 2 * j) = 2.0 * mom_of(batch, i, j);
                        w(2 * j, 2 * i) = w(2 * i, 2 * j);
                    }
            } else if (r == 1) {  // momenta
                for (int i = 0; i < n; ++i) m_t(2 * i + 1) = mom_of(batch, i, -1);
                for (int i = 0; i < n; ++i)
                    for (int j = i; j < n; ++j) {
                        w(2 * i + 1, 2 * j + 1) = 2.0 * mom_of(batch, i, j);
                        w(2 * j + 1, 2 * i + 1) = w(2 * i + 1, 2 * j + 1);
                    }
            } else if (r == 2) {  // rotated pairs: {x,p} = 2u^2 - x^2 - p^2
                for (int i = 0; i < n; ++i) {
                    const double u2 = mom_of(batch, i, i);
                    w(2 * i, 2 * i + 1) =
                        2.0 * u2 - 0.5 * w(2 * i, 2 * i) - 0.5 * w(2 * i + 1, 2 * i + 1);
                    w(2 * i + 1, 2 * i) = w(2 * i, 2 * i + 1);
                }
            } else {  // positions except mode k, paired with p_k
                const int k = r - 3;
                int col = 0;
                for (int i = 0; i < n; ++i) {
                    if (i == k) continue;
                    const double xp = mom_of(batch, col, n - 1);
                    w(2 * i, 2 * k + 1) = 2.0 * xp;
                    w(2 * k + 1, 2 * i) = w(2 * i, 2 * k + 1);
                    ++col;
                }
            }
        }
        est.samples_used = per_round * static_cast<std::int64_t>(n + 3);
    }

    est.m_tilde = m_t;
    est.V_tilde = symmetrized(w - 2.0 * m_t * m_t.transpose());
    auto [v_prime, shift] = regularized_covariance(est.V_tilde, eps, opts.shift_rule);
    est.V_prime = v_prime;
    est.shift = shift;
    est.uncertainty_ok = uncertainty_margin(est.V_prime) >= -opts.psd_tol;
    return est;
}

// State-schema JSON with a diagnostics block.
inline json moment_estimate_to_json(const MomentEstimate& est) {
    const int n = static_cast<int>(est.m_tilde.size() / 2);
    json out = state_to_json(GaussianState{n, est.m_tilde, est.V_prime});
    out["diagnostics"] = {{"epsilon_target", est.epsilon_target},
                          {"delta_target", est.delta_target},
                          {"samples_used", est.samples_used},
                          {"uncertainty_ok", est.uncertainty_ok},
                          {"shift", est.shift}};
    return out;
}

}  // namespace cvtomo
