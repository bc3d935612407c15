#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cvtomo/gaussian_state.hpp"
#include "cvtomo/symplectic.hpp"

using namespace cvtomo;
using Catch::Matchers::WithinAbs;

TEST_CASE("symplectic_form basics") {
    const Mat o1 = symplectic_form(1);
    CHECK(o1(0, 1) == 1.0);
    CHECK(o1(1, 0) == -1.0);
    CHECK(o1(0, 0) == 0.0);

    const Mat o2 = symplectic_form(2);
    CHECK(max_abs(o2.block<2, 2>(0, 0) - o1) == 0.0);
    CHECK(max_abs(o2.block<2, 2>(2, 2) - o1) == 0.0);
    CHECK(max_abs(o2.block<2, 2>(0, 2)) == 0.0);

    for (int n : {1, 2, 5})
        CHECK(max_abs(symplectic_form(n) * symplectic_form(n).transpose() -
                      Mat::Identity(2 * n, 2 * n)) == 0.0);

    CHECK_THROWS_AS(symplectic_form(0), numerical_error);
}

TEST_CASE("is_symplectic classifies simple cases") {
    CHECK(is_symplectic(Mat::Identity(2, 2)));
    CHECK(is_symplectic(symplectic_form(1)));
    CHECK(is_symplectic(symplectic_form(3)));
    CHECK_FALSE(is_symplectic(2.0 * Mat::Identity(2, 2)));
    CHECK_THROWS_AS(is_symplectic(Mat::Identity(3, 3)), numerical_error);
}

TEST_CASE("williamson on diagonal fixtures") {
    {
        const auto w = williamson(Mat::Identity(2, 2));
        CHECK_THAT(w.d(0), WithinAbs(1.0, 1e-12));
        CHECK(max_abs(w.S - Mat::Identity(2, 2)) < 1e-9);
    }
    {
        const auto w = williamson(3.0 * Mat::Identity(2, 2));
        CHECK_THAT(w.d(0), WithinAbs(3.0, 1e-12));
        CHECK(is_symplectic(w.S, 1e-10));
    }
    {
        Mat v(2, 2);
        v << 4, 0, 0, 1;
        const auto w = williamson(v);
        CHECK_THAT(w.d(0), WithinAbs(2.0, 1e-12));
        Mat expected(2, 2);
        expected << std::sqrt(2.0), 0, 0, 1.0 / std::sqrt(2.0);
        CHECK(max_abs(w.S.cwiseAbs() - expected) < 1e-9);
        Vec dd(2);
        dd << w.d(0), w.d(0);
        CHECK(max_abs(w.S * dd.asDiagonal() * w.S.transpose() - v) < 1e-10);
    }
}

TEST_CASE("williamson input validation") {
    Mat asym(2, 2);
    asym << 2, 0.5, -0.5, 2;
    CHECK_THROWS_AS(williamson(asym), numerical_error);

    Mat indef(2, 2);
    indef << 1, 0, 0, -1;
    CHECK_THROWS_AS(williamson(indef), numerical_error);

    CHECK_THROWS_AS(williamson(1e-14 * Mat::Identity(2, 2)), numerical_error);
    CHECK_THROWS_AS(williamson(Mat::Identity(3, 3)), numerical_error);

    // Tiny asymmetry within tolerance is absorbed, not rejected.
    Mat nearly = Mat::Identity(2, 2) * 2.0;
    nearly(0, 1) = 1e-12;
    CHECK_NOTHROW(williamson(nearly));
}

TEST_CASE("williamson roundtrip and d >= 1 on random covariance matrices") {
    prng g(101);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + static_cast<int>(g.next_u64() % 4);
        const GaussianState s =
            random_gaussian_state(n, 3.0 * n, Purity::mixed, g);
        const auto w = williamson(s.V);
        Vec dd(2 * n);
        for (int j = 0; j < n; ++j) dd(2 * j) = dd(2 * j + 1) = w.d(j);
        CHECK(max_abs(w.S * dd.asDiagonal() * w.S.transpose() - s.V) < 1e-9);
        CHECK(is_symplectic(w.S, 1e-9));
        CHECK(w.d.minCoeff() >= 1.0 - 1e-9);
        for (int j = 0; j + 1 < n; ++j) CHECK(w.d(j) >= w.d(j + 1));
    }
}

TEST_CASE("symplectic_eigenvalues agrees with williamson") {
    CHECK(max_abs(symplectic_eigenvalues(Mat::Identity(6, 6)) - Vec::Ones(3)) <
          1e-12);

    Mat v(2, 2);
    v << 2.5, 0, 0, 0.4;
    CHECK_THAT(symplectic_eigenvalues(v)(0), WithinAbs(1.0, 1e-12));

    prng g(202);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + static_cast<int>(g.next_u64() % 3);
        const GaussianState s =
            random_gaussian_state(n, 2.5 * n, Purity::mixed, g);
        const Vec d1 = symplectic_eigenvalues(s.V);
        const Vec d2 = williamson(s.V).d;
        CHECK(max_abs(d1 - d2) < 1e-10);
    }
}

TEST_CASE("bloch_messiah fixtures") {
    {
        const auto e = bloch_messiah(Mat::Identity(4, 4));
        CHECK(max_abs(e.O1 - Mat::Identity(4, 4)) < 1e-9);
        CHECK(max_abs(e.O2 - Mat::Identity(4, 4)) < 1e-9);
        CHECK(max_abs(e.z - Vec::Ones(2)) < 1e-12);
    }
    {
        Mat s(2, 2);
        s << 2, 0, 0, 0.5;
        const auto e = bloch_messiah(s);
        CHECK_THAT(e.z(0), WithinAbs(2.0, 1e-12));
        CHECK(max_abs(e.O1.cwiseAbs() - Mat::Identity(2, 2)) < 1e-9);
        CHECK(max_abs(e.O2.cwiseAbs() - Mat::Identity(2, 2)) < 1e-9);
    }
    CHECK_THROWS_AS(bloch_messiah(2.0 * Mat::Identity(2, 2)), numerical_error);
}

TEST_CASE("bloch_messiah roundtrip on random symplectics") {
    prng g(303);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + static_cast<int>(g.next_u64() % 4);
        const Mat s = random_symplectic(n, 1.0 + 0.8 * g.uniform(), g);
        const auto e = bloch_messiah(s);

        Vec zdiag(2 * n);
        for (int j = 0; j < n; ++j) {
            zdiag(2 * j) = e.z(j);
            zdiag(2 * j + 1) = 1.0 / e.z(j);
        }
        CHECK(max_abs(e.O1 * zdiag.asDiagonal() * e.O2 - s) < 1e-9);

        for (const Mat& o : {e.O1, e.O2}) {
            CHECK(max_abs(o * o.transpose() - Mat::Identity(2 * n, 2 * n)) < 1e-9);
            CHECK(is_symplectic(o, 1e-9));
        }
        CHECK(e.z.minCoeff() >= 1.0);

        // z values are exactly the >= 1 singular values of S.
        Vec sv = s.jacobiSvd().singularValues();
        for (int j = 0; j < n; ++j) CHECK_THAT(e.z(j), WithinAbs(sv(j), 1e-8));
    }
}

TEST_CASE("random_symplectic contract") {
    prng g(404);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 1 + static_cast<int>(g.next_u64() % 3);
        const double z_max = 1.0 + g.uniform();
        const Mat s = random_symplectic(n, z_max, g);
        CHECK(is_symplectic(s, 1e-10));
        const Vec sv = s.jacobiSvd().singularValues();
        CHECK(sv.maxCoeff() <= z_max + 1e-9);
        CHECK(sv.minCoeff() >= 1.0 / z_max - 1e-9);
    }

    {
        prng g1(77);
        const Mat s = random_symplectic(2, 1.0, g1);
        CHECK(max_abs(s * s.transpose() - Mat::Identity(4, 4)) < 1e-12);
    }
    {
        prng g1(99), g2(99);
        const Mat a = random_symplectic(3, 1.5, g1);
        const Mat b = random_symplectic(3, 1.5, g2);
        CHECK(max_abs(a - b) == 0.0);
    }
    CHECK_THROWS_AS(random_symplectic(1, 0.5, g), numerical_error);
}

TEST_CASE("norm identities for symplectic matrices") {
    CHECK(symplectic_norm_bound_check(Mat::Identity(2, 2)));
    CHECK(symplectic_norm_bound_check(3.0 * Mat::Identity(2, 2)));

    prng g(505);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(g.next_u64() % 3);
        const GaussianState s =
            random_gaussian_state(n, 2.5 * n, Purity::mixed, g);
        CHECK(symplectic_norm_bound_check(s.V));

        // ||S||_inf = ||S^-1||_inf for every symplectic S.
        const Mat sp = random_symplectic(n, 1.8, g);
        CHECK_THAT(op_norm(sp), WithinAbs(op_norm(sp.inverse()), 1e-8));
    }
}

TEST_CASE("symplectic eigenvalue perturbation inequality") {
    prng g(606);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + static_cast<int>(g.next_u64() % 3);
        const GaussianState s1 =
            random_gaussian_state(n, 2.5 * n, Purity::mixed, g);
        const GaussianState s2 =
            random_gaussian_state(n, 2.5 * n, Purity::mixed, g);
        const Vec d1 = symplectic_eigenvalues(s1.V);
        const Vec d2 = symplectic_eigenvalues(s2.V);
        const double lhs = (d1 - d2).cwiseAbs().maxCoeff();
        const double rhs = std::sqrt(condition_number(s1.V) *
                                     condition_number(s2.V)) *
                           op_norm(s1.V - s2.V);
        CHECK(lhs <= rhs + 1e-9);
    }
}

TEST_CASE("covariance inverse inequalities") {
    prng g(707);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + static_cast<int>(g.next_u64() % 3);
        const GaussianState mixed =
            random_gaussian_state(n, 2.5 * n, Purity::mixed, g);
        CHECK(op_norm(mixed.V.inverse()) <= op_norm(mixed.V) + 1e-9);

        const GaussianState pure =
            random_gaussian_state(n, 2.5 * n, Purity::pure, g);
        const Mat omega = symplectic_form(n);
        CHECK(max_abs(pure.V.inverse() - omega * pure.V * omega.transpose()) <
              1e-9);
    }
}

TEST_CASE("uncertainty_margin separates states from non-states") {
    CHECK_THAT(uncertainty_margin(Mat::Identity(2, 2)), WithinAbs(0.0, 1e-12));
    CHECK_THAT(uncertainty_margin(3.0 * Mat::Identity(2, 2)),
               WithinAbs(2.0, 1e-12));
    CHECK_THAT(uncertainty_margin(0.5 * Mat::Identity(2, 2)),
               WithinAbs(-0.5, 1e-12));
}
