#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cvtomo/errors.hpp"

namespace cvtomo {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& a) {
    return a.cwiseAbs().maxCoeff();
}

// Spectral norm (largest singular value).
inline double op_norm(const Mat& a) {
    return a.jacobiSvd().singularValues()(0);
}

// Trace norm (sum of singular values).
inline double trace_norm(const Mat& a) {
    return a.jacobiSvd().singularValues().sum();
}

// Hilbert-Schmidt (Frobenius) norm.
inline double hs_norm(const Mat& a) { return a.norm(); }

inline Mat symmetrized(const Mat& a) { return 0.5 * (a + a.transpose()); }

// Condition number of a symmetric positive-definite matrix in the spectral
// norm: largest over smallest eigenvalue.
inline double condition_number(const Mat& v) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(v));
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0)
        throw numerical_error("condition_number: matrix not positive definite");
    return hi / lo;
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& xs,
                           const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw numerical_error("loglog_slope: need two or more points");
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (xs[i] <= 0.0 || ys[i] <= 0.0)
            throw numerical_error("loglog_slope: nonpositive data");
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw numerical_error("loglog_slope: degenerate abscissae");
    return (n * sxy - sx * sy) / denom;
}

// Median of a copy of the input (even length: midpoint average).
inline double median(std::vector<double> v) {
    if (v.empty()) throw numerical_error("median: empty input");
    const std::size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + h, v.end());
    double m = v[h];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + h);
        m = 0.5 * (m + lo);
    }
    return m;
}

}  // namespace cvtomo
