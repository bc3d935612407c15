#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cvtomo/estimation.hpp"

using namespace cvtomo;

TEST_CASE("median of means basics") {
    REQUIRE(median_of_means({3.5, 3.5, 3.5, 3.5}, 2) == 3.5);
    REQUIRE(median_of_means({1.0, 2.0, 3.0, 4.0}, 1) == Catch::Approx(2.5));

    // bins (1,2,3) (4,5,6) (7,8,9), sample 10 truncated
    std::vector<double> ten;
    for (int i = 1; i <= 10; ++i) ten.push_back(double(i));
    REQUIRE(median_of_means(ten, 3) == Catch::Approx(5.0));

    REQUIRE_THROWS_AS(median_of_means({}, 1), numerical_error);
    REQUIRE_THROWS_AS(median_of_means({1.0}, 0), numerical_error);
    REQUIRE_THROWS_AS(median_of_means({1.0, 2.0}, 3), numerical_error);
}

TEST_CASE("outlier robustness of the binned median") {
    // one wild bin cannot drag the estimate
    std::vector<double> xs(90, 1.0);
    for (int i = 0; i < 10; ++i) xs.push_back(1e6);
    REQUIRE(median_of_means(xs, 10) == Catch::Approx(1.0));
}

TEST_CASE("copy budget formula") {
    // frozen value, checked against an independent long-double evaluation
    REQUIRE(moment_sample_count(1, 0.5, 0.1, 1.0) == 11022936);

    {
        const long double l = logl(2.0L * 5.0L / 0.1L);
        const long double per = ceill(68.0L * l * 200.0L * 11.0L / 0.25L);
        REQUIRE(static_cast<std::int64_t>(4.0L * per) ==
                moment_sample_count(1, 0.5, 0.1, 1.0));
    }

    SECTION("monotone in the target accuracy") {
        REQUIRE(moment_sample_count(1, 0.25, 0.1, 1.0) >
                moment_sample_count(1, 0.5, 0.1, 1.0));
        REQUIRE(moment_sample_count(1, 0.5, 0.1, 1.0) >=
                moment_sample_count(1, 0.51, 0.1, 1.0));
    }

    SECTION("cubic-in-n growth up to the log factor") {
        const double r8 = double(moment_sample_count(8, 0.5, 0.1, 2.0)) /
                          double(moment_sample_count(4, 0.5, 0.1, 2.0));
        // (n+3) * n^2 E2^2-dominated: ratio near (11/7)*(64/16) = 6.29
        REQUIRE(r8 > 5.0);
        REQUIRE(r8 < 8.0);
    }

    SECTION("domain checks") {
        REQUIRE_THROWS_AS(moment_sample_count(0, 0.5, 0.1, 1.0), numerical_error);
        REQUIRE_THROWS_AS(moment_sample_count(1, 0.0, 0.1, 1.0), numerical_error);
        REQUIRE_THROWS_AS(moment_sample_count(1, 1.0, 0.1, 1.0), numerical_error);
        REQUIRE_THROWS_AS(moment_sample_count(1, 0.5, 0.0, 1.0), numerical_error);
        REQUIRE_THROWS_AS(moment_sample_count(1, 0.5, 0.1, 0.4), numerical_error);
    }
}

TEST_CASE("bin counts") {
    REQUIRE(mom_bins(1, 0.05) == 11);        // ceil(2 ln 200)
    REQUIRE(mom_plain_bins(0.05) == 8);      // ceil(2 ln 40)
    REQUIRE(mom_plain_count(0.1, 0.05, 1.0) == 25085);
    REQUIRE_THROWS_AS(mom_plain_bins(1.5), numerical_error);
}

TEST_CASE("regularizing shift") {
    prng gen(18);
    GaussianState s = random_gaussian_state(2, 3.0, Purity::mixed, gen);
    const double eps = 0.3;

    SECTION("half-epsilon rule repairs any estimate within eps/2") {
        for (int rep = 0; rep < 40; ++rep) {
            Mat noise(4, 4);
            for (int i = 0; i < 16; ++i) noise(i / 4, i % 4) = gen.normal();
            noise = symmetrized(noise);
            noise *= (0.5 * eps) / std::max(op_norm(noise), 1e-300);

            auto [v_prime, shift] =
                regularized_covariance(s.V + noise, eps, ShiftRule::half_epsilon);
            REQUIRE(shift == 0.5 * eps);
            REQUIRE(op_norm(v_prime - s.V) <= eps + 1e-12);
            REQUIRE(uncertainty_margin(v_prime) >= -1e-12);
        }
    }

    SECTION("minimal rule is a no-op on physical estimates") {
        auto [v_prime, shift] = regularized_covariance(s.V, 0.3, ShiftRule::minimal);
        REQUIRE(shift == 0.0);
        REQUIRE(max_abs(v_prime - s.V) < 1e-14);
    }

    SECTION("minimal rule shifts just past the deficit") {
        Mat v = s.V - 0.2 * Mat::Identity(4, 4);
        auto [v_prime, shift] = regularized_covariance(v, 0.3, ShiftRule::minimal);
        REQUIRE(uncertainty_margin(v_prime) >= -1e-10);
        REQUIRE(shift <= 0.2 + uncertainty_margin(s.V) + 1e-6);
    }
}

TEST_CASE("noiseless moment estimation is the regularizer alone") {
    prng gen(5);
    for (int rep = 0; rep < 10; ++rep) {
        GaussianState s = random_gaussian_state(1 + rep % 3, 4.0, Purity::mixed, gen);
        StateSource src(s);
        MomentOptions opts;
        opts.exact_expectations = true;
        MomentEstimate est = estimate_moments(src, 0.4, 0.1, 2.0, gen, opts);
        REQUIRE(max_abs(est.V_tilde - s.V) < 1e-11);
        REQUIRE(max_abs(est.V_prime - (s.V + 0.2 * Mat::Identity(2 * s.n, 2 * s.n))) <
                1e-11);
        REQUIRE((est.m_tilde - s.m).norm() < 1e-12);
        REQUIRE(est.uncertainty_ok);
        REQUIRE(est.samples_used == 0);
        REQUIRE(op_norm(est.V_prime - s.V) <= 0.4);  // the guarantee, saturated at eps/2
    }
}

TEST_CASE("sampled moment estimation converges") {
    prng gen(606);

    SECTION("vacuum, modest budget") {
        StateSource src(vacuum(1));
        MomentOptions opts;
        opts.copies = 40000;
        MomentEstimate est = estimate_moments(src, 0.5, 0.1, 1.0, gen, opts);
        REQUIRE(est.uncertainty_ok);
        REQUIRE(est.samples_used == 40000);
        REQUIRE(src.copies_consumed() == 40000);
        REQUIRE(op_norm(est.V_prime - Mat::Identity(2, 2)) <= 0.5);
        REQUIRE(est.m_tilde.norm() < 0.05);
    }

    SECTION("unit thermal state centers at zero") {
        StateSource src(thermal({1.0}));
        MomentOptions opts;
        opts.copies = 100000;
        MomentEstimate est = estimate_moments(src, 0.5, 0.1, 1.5, gen, opts);
        REQUIRE(est.m_tilde.norm() < 0.05);
        REQUIRE(max_abs(est.V_tilde - 3.0 * Mat::Identity(2, 2)) < 0.2);
    }

    SECTION("two-mode correlated state") {
        prng sgen(41);
        GaussianState s = apply_gaussian_map(thermal({0.4, 0.1}),
                                             random_symplectic(2, 1.4, sgen),
                                             Vec::Zero(4));
        StateSource src(s);
        MomentOptions opts;
        opts.copies = 500000;
        MomentEstimate est = estimate_moments(src, 0.3, 0.1, 2.0, gen, opts);
        REQUIRE(max_abs(est.V_tilde - s.V) < 0.15);
        REQUIRE(est.uncertainty_ok);
    }

    SECTION("error falls like one over root N") {
        std::vector<double> budgets = {1e3, 1e4, 1e5, 1e6};
        std::vector<double> errors;
        for (double b : budgets) {
            std::vector<double> errs;
            for (int rep = 0; rep < 5; ++rep) {
                StateSource src(thermal({0.5}));
                MomentOptions opts;
                opts.copies = static_cast<std::int64_t>(b);
                opts.shift_rule = ShiftRule::minimal;
                MomentEstimate est = estimate_moments(src, 0.5, 0.1, 1.0, gen, opts);
                errs.push_back(hs_norm(est.V_tilde - 2.0 * Mat::Identity(2, 2)));
            }
            errors.push_back(median(errs));
        }
        const double slope = loglog_slope(budgets, errors);
        REQUIRE(slope == Catch::Approx(-0.5).margin(0.1));
    }

    SECTION("starved budgets rejected") {
        StateSource src(vacuum(1));
        MomentOptions opts;
        opts.copies = 30;  // 7 shots per round < 11 bins
        REQUIRE_THROWS_AS(estimate_moments(src, 0.5, 0.05, 1.0, gen, opts),
                          numerical_error);
    }
}

TEST_CASE("estimate serialization") {
    prng gen(7);
    StateSource src(vacuum(2));
    MomentOptions opts;
    opts.exact_expectations = true;
    MomentEstimate est = estimate_moments(src, 0.2, 0.1, 1.0, gen, opts);
    json j = moment_estimate_to_json(est);
    REQUIRE(j["n"] == 2);
    REQUIRE(j["diagnostics"]["uncertainty_ok"] == true);
    REQUIRE(j["diagnostics"]["shift"] == 0.1);
    GaussianState round = state_from_json(j);
    REQUIRE(max_abs(round.V - est.V_prime) < 1e-15);
}
