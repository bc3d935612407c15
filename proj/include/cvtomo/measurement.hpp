#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cvtomo/errors.hpp"
#include "cvtomo/fock.hpp"
#include "cvtomo/gaussian_state.hpp"
#include "cvtomo/linalg.hpp"
#include "cvtomo/rng.hpp"

namespace cvtomo {

// A set of jointly measured quadratures.  Column j of `coeffs` holds the
// expansion of the j-th measured observable in the canonical quadratures, so
// the set commutes iff coeffs^T Omega coeffs = 0.
struct QuadratureSetting {
    std::string name;
    Mat coeffs;  // 2n x q
    std::vector<std::string> labels;
};

inline bool commuting_setting(const QuadratureSetting& s, double tol = 1e-12) {
    if (s.coeffs.rows() % 2 != 0 || s.coeffs.rows() == 0) return false;
    const Mat omega = symplectic_form(static_cast<int>(s.coeffs.rows() / 2));
    return max_abs(s.coeffs.transpose() * omega * s.coeffs) <= tol;
}

struct SampleBatch {
    QuadratureSetting setting;
    std::vector<Vec> shots;
};

// One shot per row, the setting recorded in the header.
inline void write_csv(const SampleBatch& batch, std::ostream& out) {
    out << "# setting: " << batch.setting.name << "\n";
    for (std::size_t j = 0; j < batch.setting.labels.size(); ++j)
        out << (j ? "," : "") << batch.setting.labels[j];
    out << "\n";
    for (const Vec& shot : batch.shots) {
        for (Eigen::Index j = 0; j < shot.size(); ++j)
            out << (j ? "," : "") << shot(j);
        out << "\n";
    }
}

// Supply of identical state copies.  Analytic mode samples the Gaussian law
// directly; a Fock-space density is converted to the Gaussian law with the
// same first and second moments (the downstream estimators consume nothing
// beyond those moments, so the surrogate is exact for them).
class StateSource {
public:
    explicit StateSource(GaussianState s) : state_(std::move(s)) {
        if (!validate(state_))
            throw numerical_error("StateSource: invalid Gaussian state");
    }

    explicit StateSource(const FockDensity& rho)
        : state_(moment_matched(rho)), from_fock_(true) {}

    const GaussianState& moments() const { return state_; }
    bool from_fock() const { return from_fock_; }
    std::int64_t copies_consumed() const { return consumed_; }
    void consume(std::int64_t k) {
        if (k < 0) throw numerical_error("StateSource: negative consumption");
        consumed_ += k;
    }

private:
    static GaussianState moment_matched(const FockDensity& rho) {
        const int n = rho.space.modes();
        const auto ops = quadrature_operators(rho.space);
        Vec m(2 * n);
        for (int j = 0; j < 2 * n; ++j)
            m(j) = (rho.rho * ops[j]).trace().real();
        Mat w(2 * n, 2 * n);
        for (int j = 0; j < 2 * n; ++j)
            for (int k = j; k < 2 * n; ++k) {
                w(j, k) = (rho.rho * (ops[j] * ops[k] + ops[k] * ops[j]))
                              .trace()
                              .real();
                w(k, j) = w(j, k);
            }
        GaussianState s{n, m, symmetrized(w - 2.0 * m * m.transpose())};
        if (!validate(s, 1e-6))
            throw numerical_error("StateSource: moment extraction left the state set");
        return s;
    }

    GaussianState state_;
    bool from_fock_ = false;
    std::int64_t consumed_ = 0;
};

namespace detail {

// Factor F with F F^T = cov, robust to semidefinite inputs (pure squeezed
// marginals have exact zeros).
inline Mat covariance_factor(const Mat& cov) {
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() == Eigen::Success) return Mat(llt.matrixL());
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(cov));
    Vec lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

inline std::vector<Vec> gaussian_draws(const Vec& mean, const Mat& cov,
                                       std::int64_t count, prng& gen) {
    const Mat f = covariance_factor(cov);
    std::vector<Vec> shots;
    shots.reserve(static_cast<std::size_t>(count));
    Vec z(mean.size());
    for (std::int64_t s = 0; s < count; ++s) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = gen.normal();
        shots.push_back(mean + f * z);
    }
    return shots;
}

}  // namespace detail

// Joint measurement of both quadratures of every mode at the cost of one
// unit of added vacuum noise: outcomes follow N[m, (V+I)/2].
inline SampleBatch heterodyne_sample(StateSource& source, std::int64_t count,
                                     prng& gen) {
    if (count < 0) throw numerical_error("heterodyne_sample: negative count");
    const GaussianState& s = source.moments();
    QuadratureSetting setting;
    setting.name = "heterodyne";
    setting.coeffs = Mat::Identity(2 * s.n, 2 * s.n);
    for (int j = 0; j < s.n; ++j) {
        setting.labels.push_back("x" + std::to_string(j + 1));
        setting.labels.push_back("p" + std::to_string(j + 1));
    }
    const Mat cov = 0.5 * (s.V + Mat::Identity(2 * s.n, 2 * s.n));
    SampleBatch batch{std::move(setting), detail::gaussian_draws(s.m, cov, count, gen)};
    source.consume(count);
    return batch;
}

// Ideal joint homodyne on a commuting quadrature set: outcomes follow the
// marginal N[C^T m, C^T V C / 2].
inline SampleBatch homodyne_joint_sample(StateSource& source,
                                         const QuadratureSetting& setting,
                                         std::int64_t count, prng& gen) {
    if (count < 0) throw numerical_error("homodyne_joint_sample: negative count");
    const GaussianState& s = source.moments();
    if (setting.coeffs.rows() != 2 * s.n)
        throw numerical_error("homodyne_joint_sample: setting dimension mismatch");
    if (!commuting_setting(setting))
        throw numerical_error("homodyne_joint_sample: quadratures do not commute");
    const Vec mean = setting.coeffs.transpose() * s.m;
    const Mat cov = 0.5 * symmetrized(setting.coeffs.transpose() * s.V * setting.coeffs);
    SampleBatch batch{setting, detail::gaussian_draws(mean, cov, count, gen)};
    source.consume(count);
    return batch;
}

// The n+3 measurement rounds of the covariance estimation schedule: all
// positions, all momenta, the per-mode rotated pair surrogate, and one round
// per mode k pairing every other position with p_k.  The rotated round feeds
// the identity {x,p} = 2u^2 - x^2 - p^2 with u = (x+p)/sqrt(2).
inline std::vector<QuadratureSetting> table2_sample_plan(int n) {
    if (n < 1) throw numerical_error("table2_sample_plan: need n >= 1");
    std::vector<QuadratureSetting> plan;

    QuadratureSetting xs{"positions", Mat::Zero(2 * n, n), {}};
    QuadratureSetting ps{"momenta", Mat::Zero(2 * n, n), {}};
    QuadratureSetting us{"rotated", Mat::Zero(2 * n, n), {}};
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int j = 0; j < n; ++j) {
        xs.coeffs(2 * j, j) = 1.0;
        xs.labels.push_back("x" + std::to_string(j + 1));
        ps.coeffs(2 * j + 1, j) = 1.0;
        ps.labels.push_back("p" + std::to_string(j + 1));
        us.coeffs(2 * j, j) = inv_sqrt2;
        us.coeffs(2 * j + 1, j) = inv_sqrt2;
        us.labels.push_back("u" + std::to_string(j + 1));
    }
    plan.push_back(std::move(xs));
    plan.push_back(std::move(ps));
    plan.push_back(std::move(us));

    for (int k = 0; k < n; ++k) {
        QuadratureSetting mixed{"positions_except_p" + std::to_string(k + 1),
                                Mat::Zero(2 * n, n), {}};
        int col = 0;
        for (int j = 0; j < n; ++j) {
            if (j == k) continue;
            mixed.coeffs(2 * j, col) = 1.0;
            mixed.labels.push_back("x" + std::to_string(j + 1));
            ++col;
        }
        mixed.coeffs(2 * k + 1, col) = 1.0;
        mixed.labels.push_back("p" + std::to_string(k + 1));
        plan.push_back(std::move(mixed));
    }
    return plan;
}

}  // namespace cvtomo
