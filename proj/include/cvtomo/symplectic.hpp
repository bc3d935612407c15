#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "cvtomo/errors.hpp"
#include "cvtomo/linalg.hpp"
#include "cvtomo/rng.hpp"

namespace cvtomo {

// Canonical form: direct sum of [[0,1],[-1,0]] blocks, quadratures interleaved
// as (x_1, p_1, x_2, p_2, ...).
inline Mat symplectic_form(int n) {
    if (n < 1) throw numerical_error("symplectic_form: n must be positive");
    Mat omega = Mat::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        omega(2 * j, 2 * j + 1) = 1.0;
        omega(2 * j + 1, 2 * j) = -1.0;
    }
    return omega;
}

inline bool is_symplectic(const Mat& s, double tol = 1e-8) {
    if (s.rows() != s.cols() || s.rows() % 2 != 0 || s.rows() == 0)
        throw numerical_error("is_symplectic: need square even-dimensional input");
    const Mat omega = symplectic_form(static_cast<int>(s.rows() / 2));
    return max_abs(s * omega * s.transpose() - omega) <= tol;
}

// Smallest eigenvalue of the Hermitian matrix V + i*Omega.  Nonnegative (up
// to tolerance) exactly when V is a valid covariance matrix.
inline double uncertainty_margin(const Mat& v) {
    if (v.rows() != v.cols() || v.rows() % 2 != 0 || v.rows() == 0)
        throw numerical_error("uncertainty_margin: bad shape");
    const int n = static_cast<int>(v.rows() / 2);
    CMat h = v.cast<std::complex<double>>();
    h += std::complex<double>(0.0, 1.0) * symplectic_form(n).cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (h + h.adjoint()));
    return es.eigenvalues().minCoeff();
}

struct SymplecticDecomposition {
    Mat S;   // symplectic
    Vec d;   // n symplectic eigenvalues, descending; V = S diag(d_1,d_1,...) S^T
};

namespace detail {

// Shared validation for the V-decomposition entry points.  Returns the
// symmetrized matrix.
inline Mat checked_covariance_input(const Mat& v, double tol, const char* who) {
    if (v.rows() != v.cols() || v.rows() % 2 != 0 || v.rows() == 0)
        throw numerical_error(std::string(who) + ": need square even-dimensional input");
    if (max_abs(v - v.transpose()) > tol)
        throw numerical_error(std::string(who) + ": input is not symmetric");
    Mat sym = symmetrized(v);
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    if (es.eigenvalues().minCoeff() < 1e-10)
        throw numerical_error(std::string(who) +
                              ": matrix is singular or not positive definite");
    return sym;
}

}  // namespace detail

// V = S D S^T with S symplectic and D = diag(d_1, d_1, ..., d_n, d_n).
//
// Construction: A = V^{1/2}, real Schur form of the antisymmetric A*Omega*A
// gives an orthogonal O with O^T(A Omega A)O block diagonal, blocks
// [[0,d],[-d,0]]; then S = A*O*D^{-1/2} is symplectic and diagonalizes V.
inline SymplecticDecomposition williamson(const Mat& v, double tol = 1e-8) {
    const Mat vs = detail::checked_covariance_input(v, tol, "williamson");
    const int n = static_cast<int>(vs.rows() / 2);

    Eigen::SelfAdjointEigenSolver<Mat> es(vs);
    const Mat a = es.operatorSqrt();
    const Mat m = a * symplectic_form(n) * a;

    Eigen::RealSchur<Mat> schur(m);
    Mat t = schur.matrixT();
    Mat u = schur.matrixU();

    // M is antisymmetric (normal), so T is block diagonal with 2x2 blocks
    // holding the +-i*d eigenvalue pairs; V > 0 excludes 1x1 blocks.
    std::vector<double> ds(n);
    for (int j = 0; j < n; ++j) {
        const int i = 2 * j;
        double d = 0.5 * (t(i, i + 1) - t(i + 1, i));
        if (std::abs(d) < 1e-12)
            throw numerical_error("williamson: degenerate Schur block");
        if (d < 0) {
            u.col(i).swap(u.col(i + 1));
            d = -d;
        }
        ds[j] = d;
    }

    // Descending d, stable so ties keep the Schur block order.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return ds[x] > ds[y]; });

    Mat o(2 * n, 2 * n);
    Vec d(n);
    for (int j = 0; j < n; ++j) {
        o.col(2 * j) = u.col(2 * order[j]);
        o.col(2 * j + 1) = u.col(2 * order[j] + 1);
        d(j) = ds[order[j]];
    }

    Vec dinv_sqrt(2 * n);
    for (int j = 0; j < n; ++j)
        dinv_sqrt(2 * j) = dinv_sqrt(2 * j + 1) = 1.0 / std::sqrt(d(j));

    SymplecticDecomposition out;
    out.S = a * o * dinv_sqrt.asDiagonal();
    out.d = d;
    return out;
}

// Symplectic spectrum through the |eigenvalues of i*Omega*V| route; descending.
// Independent of williamson, so the two can cross-check each other.
inline Vec symplectic_eigenvalues(const Mat& v, double tol = 1e-8) {
    const Mat vs = detail::checked_covariance_input(v, tol, "symplectic_eigenvalues");
    const int n = static_cast<int>(vs.rows() / 2);
    Eigen::EigenSolver<Mat> es(symplectic_form(n) * vs);
    std::vector<double> mags(2 * n);
    for (int i = 0; i < 2 * n; ++i) mags[i] = std::abs(es.eigenvalues()(i));
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    Vec d(n);
    for (int j = 0; j < n; ++j) d(j) = 0.5 * (mags[2 * j] + mags[2 * j + 1]);
    return d;
}

struct EulerDecomposition {
    Mat O1;  // symplectic orthogonal
    Vec z;   // n squeezing values >= 1, descending
    Mat O2;  // symplectic orthogonal; S = O1 * Z * O2, Z = diag(z_j, 1/z_j)
};

// S = O1 Z O2 via the polar form S = P*Q: P = (S S^T)^{1/2} is symmetric
// positive symplectic, Q orthogonal symplectic.  Eigenvectors of P pair as
// v <-> Omega*v with eigenvalues z and 1/z, which yields O1 directly; then
// O2 = Z^{-1} O1^T S.
inline EulerDecomposition bloch_messiah(const Mat& s, double tol = 1e-8) {
    if (!is_symplectic(s, tol))
        throw numerical_error("bloch_messiah: input is not symplectic");
    const int n = static_cast<int>(s.rows() / 2);
    const Mat omega = symplectic_form(n);

    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(s * s.transpose()));
    // P = sqrt(S S^T): same eigenvectors, square-rooted eigenvalues.
    Vec lam(2 * n);
    for (int i = 0; i < 2 * n; ++i) lam(i) = std::sqrt(std::max(es.eigenvalues()(i), 0.0));

    constexpr double kUnitTol = 1e-8;
    std::vector<int> squeezer;            // eigenvalue indices with lambda > 1
    std::vector<int> unit;                // |lambda - 1| <= kUnitTol
    for (int i = 0; i < 2 * n; ++i) {
        if (lam(i) > 1.0 + kUnitTol)
            squeezer.push_back(i);
        else if (lam(i) >= 1.0 - kUnitTol)
            unit.push_back(i);
        // lambda < 1 entries are the Omega-partners of the squeezer class.
    }
    if (squeezer.size() + unit.size() / 2 != static_cast<std::size_t>(n) ||
        unit.size() % 2 != 0)
        throw numerical_error("bloch_messiah: eigenvalue pairing failed");

    // Squeezer modes, largest z first (solver returns ascending order).
    std::sort(squeezer.begin(), squeezer.end(),
              [&](int x, int y) { return lam(x) > lam(y); });

    std::vector<Vec> vs;
    std::vector<double> zs;
    for (int idx : squeezer) {
        vs.push_back(es.eigenvectors().col(idx));
        zs.push_back(lam(idx));
    }

    // lambda = 1 eigenspace: greedily extract a symplectic orthonormal basis.
    // Within this space -Omega*u stays inside it, u and -Omega*u are
    // orthogonal, and successive pairs stay orthogonal after projection.
    if (!unit.empty()) {
        const int k = static_cast<int>(unit.size()) / 2;
        Mat basis(2 * n, unit.size());
        for (std::size_t c = 0; c < unit.size(); ++c)
            basis.col(static_cast<int>(c)) = es.eigenvectors().col(unit[c]);
        std::vector<Vec> taken;
        for (int pair = 0; pair < k; ++pair) {
            Vec best;
            double best_norm = -1.0;
            for (int c = 0; c < basis.cols(); ++c) {
                Vec cand = basis.col(c);
                for (const Vec& t : taken) cand -= t.dot(cand) * t;
                const double nn = cand.norm();
                if (nn > best_norm) {
                    best_norm = nn;
                    best = cand;
                }
            }
            if (best_norm < 1e-6)
                throw numerical_error("bloch_messiah: unit eigenspace exhausted");
            best /= best_norm;
            Vec partner = -omega * best;
            taken.push_back(best);
            taken.push_back(partner);
            vs.push_back(best);
            zs.push_back(1.0);
        }
    }

    Mat o1(2 * n, 2 * n);
    Vec z(n);
    for (int j = 0; j < n; ++j) {
        Vec v = vs[j];
        // Deterministic sign: largest-magnitude component positive.
        int arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        o1.col(2 * j) = v;
        o1.col(2 * j + 1) = -omega * v;
        z(j) = std::max(zs[j], 1.0);
    }

    Vec zinv(2 * n);
    for (int j = 0; j < n; ++j) {
        zinv(2 * j) = 1.0 / z(j);
        zinv(2 * j + 1) = z(j);
    }

    EulerDecomposition out;
    out.O1 = o1;
    out.z = z;
    out.O2 = zinv.asDiagonal() * o1.transpose() * s;
    return out;
}

namespace detail {

// Haar-random unitary: QR of a complex Ginibre matrix with the R-diagonal
// phase fix.
inline CMat haar_unitary(int n, prng& g) {
    CMat ginibre(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            ginibre(r, c) = std::complex<double>(g.normal(), g.normal()) / std::sqrt(2.0);
    Eigen::HouseholderQR<CMat> qr(ginibre);
    CMat q = qr.householderQ() * CMat::Identity(n, n);
    for (int c = 0; c < n; ++c) {
        const std::complex<double> r = qr.matrixQR()(c, c);
        const double mag = std::abs(r);
        q.col(c) *= (mag > 0) ? r / mag : std::complex<double>(1.0, 0.0);
    }
    return q;
}

// Realification of an n x n unitary into a 2n x 2n symplectic orthogonal
// matrix in the interleaved quadrature convention.
inline Mat passive_from_unitary(const CMat& u) {
    const int n = static_cast<int>(u.rows());
    Mat o(2 * n, 2 * n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const double x = u(j, k).real();
            const double y = u(j, k).imag();
            o(2 * j, 2 * k) = x;
            o(2 * j, 2 * k + 1) = -y;
            o(2 * j + 1, 2 * k) = y;
            o(2 * j + 1, 2 * k + 1) = x;
        }
    return o;
}

}  // namespace detail

// Random symplectic built in Euler form from two Haar-random passives and
// squeezing values uniform on [1, z_max].  Draw order is fixed (O1, z, O2)
// so a given seed always produces the same matrix.
inline Mat random_symplectic(int n, double z_max, prng& g) {
    if (n < 1) throw numerical_error("random_symplectic: n must be positive");
    if (z_max < 1.0) throw numerical_error("random_symplectic: z_max must be >= 1");
    const Mat o1 = detail::passive_from_unitary(detail::haar_unitary(n, g));
    Vec z(2 * n);
    for (int j = 0; j < n; ++j) {
        const double zj = 1.0 + (z_max - 1.0) * g.uniform();
        z(2 * j) = zj;
        z(2 * j + 1) = 1.0 / zj;
    }
    const Mat o2 = detail::passive_from_unitary(detail::haar_unitary(n, g));
    return o1 * z.asDiagonal() * o2;
}

// Checks the spectral-norm inequality ||S||_inf <= sqrt(||V||_inf) for the
// williamson S of V (test utility).
inline bool symplectic_norm_bound_check(const Mat& v) {
    const SymplecticDecomposition w = williamson(v);
    return op_norm(w.S) <= std::sqrt(op_norm(v)) * (1.0 + 1e-10) + 1e-12;
}

}  // namespace cvtomo
