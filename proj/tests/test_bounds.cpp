#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cvtomo/bounds.hpp"
#include "cvtomo/fock.hpp"
#include "cvtomo/rng.hpp"

using namespace cvtomo;

TEST_CASE("photon prefactor") {
    REQUIRE(f_of_N(0.0) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-12));
    REQUIRE(f_of_N(1.0) == Catch::Approx((1.0 + std::sqrt(2.0)) / std::sqrt(2.0))
                               .margin(1e-12));
    double prev = 0.0;
    for (double n = 0.0; n <= 10.0; n += 0.25) {
        REQUIRE(f_of_N(n) > prev);
        prev = f_of_N(n);
    }
    REQUIRE_THROWS_AS(f_of_N(-0.1), numerical_error);
}

TEST_CASE("mixed-pair upper bound") {
    REQUIRE(upper_bound_mixed(vacuum(1), vacuum(1), 0.0) == 0.0);

    SECTION("vacuum against the unit thermal state") {
        // f(1) * sqrt(2) * sqrt(trace norm 4) = 4.8284, uninformative
        const double b = upper_bound_mixed(vacuum(1), thermal({1.0}), 1.0);
        REQUIRE(b == Catch::Approx(f_of_N(1.0) * std::sqrt(2.0) * 2.0).margin(1e-12));
        REQUIRE(b == Catch::Approx(4.8284).margin(1e-4));
    }

    SECTION("nearby coherent state, informative regime") {
        Vec r(2);
        r << 0.1, 0.0;
        const double b = upper_bound_mixed(vacuum(1), coherent(r), 0.005);
        REQUIRE(b == Catch::Approx(0.0758873).margin(1e-6));
        const double exact = std::sqrt(1.0 - std::exp(-0.005));
        REQUIRE(exact == Catch::Approx(0.0706232).margin(1e-6));
        REQUIRE(b >= exact);
    }

    SECTION("budget violations carry the offending value") {
        try {
            upper_bound_mixed(vacuum(1), thermal({1.0}), 0.5);
            FAIL("expected a throw");
        } catch (const numerical_error& e) {
            REQUIRE(std::string(e.what()).find("1.0") != std::string::npos);
            REQUIRE(std::string(e.what()).find("0.5") != std::string::npos);
        }
    }
}

TEST_CASE("pure-reference upper bound") {
    Vec r(2);
    r << 0.2, 0.0;
    const GaussianState rho = coherent(r);

    REQUIRE(upper_bound_pure(vacuum(1), vacuum(1), PureBoundForm::trace_v) == 0.0);

    SECTION("energy form fixture") {
        const double b =
            upper_bound_pure(vacuum(1), rho, PureBoundForm::energy, 0.52);
        REQUIRE(b == Catch::Approx(std::sqrt(0.52 * 0.08)).margin(1e-12));
        REQUIRE(b == Catch::Approx(0.2040).margin(1e-4));
        const double exact = std::sqrt(1.0 - std::exp(-0.02));
        REQUIRE(exact == Catch::Approx(0.1407172).margin(1e-6));
        REQUIRE(b >= exact);
    }

    SECTION("covariance-trace form fixture") {
        const double b = upper_bound_pure(vacuum(1), rho, PureBoundForm::trace_v);
        REQUIRE(b == Catch::Approx(0.5 * std::sqrt(2.0) * std::sqrt(0.08)).margin(1e-12));
    }

    SECTION("rejections") {
        REQUIRE_THROWS_AS(
            upper_bound_pure(thermal({1.0}), rho, PureBoundForm::trace_v),
            numerical_error);
        REQUIRE_THROWS_AS(upper_bound_pure(vacuum(1), rho, PureBoundForm::energy),
                          numerical_error);
        REQUIRE_THROWS_AS(
            upper_bound_pure(vacuum(1), rho, PureBoundForm::energy, 0.3),
            numerical_error);
    }
}

TEST_CASE("lower bounds") {
    const LowerBounds zero = lower_bounds(vacuum(1), vacuum(1), 1.0);
    REQUIRE(zero.from_mean == 0.0);
    REQUIRE(zero.from_cov == 0.0);

    SECTION("covariance route fixture") {
        const LowerBounds lb = lower_bounds(vacuum(1), thermal({1.0}), 1.5);
        REQUIRE(lb.from_cov ==
                Catch::Approx(2.0 * std::sqrt(2.0) / 7.0 / 200.0).margin(1e-12));
        REQUIRE(lb.from_cov == Catch::Approx(0.002020).margin(1e-6));
    }

    SECTION("mean route fixture") {
        Vec r(2);
        r << std::sqrt(2.0), 0.0;
        const LowerBounds lb = lower_bounds(vacuum(1), coherent(r), 1.5);
        REQUIRE(lb.from_mean ==
                Catch::Approx(std::sqrt(2.0 / 7.0) / 200.0).margin(1e-12));
        REQUIRE(lb.from_mean == Catch::Approx(0.0026726).margin(1e-6));
        const double exact = std::sqrt(1.0 - std::exp(-1.0));
        REQUIRE(lb.from_mean <= exact);
    }

    REQUIRE_THROWS_AS(lower_bounds(vacuum(1), thermal({1.0}), 1.0), numerical_error);
}

TEST_CASE("bounds sandwich the oracle distance") {
    prng gen(7117);
    for (int rep = 0; rep < 60; ++rep) {
        const bool pure_first = (rep % 3 == 0);
        GaussianState a = random_gaussian_state(
            1, 2.0, pure_first ? Purity::pure : Purity::mixed, gen);
        GaussianState b = random_gaussian_state(1, 2.0, Purity::mixed, gen);

        FockDensity ra = gaussian_density_auto(a, 5e-5);
        FockDensity rb = gaussian_density_auto(b, 5e-5);
        const int m = std::max(ra.space.cutoff(), rb.space.cutoff());
        FockSpace shared(1, m);
        ra = gaussian_density_matrix(shared, a);
        rb = gaussian_density_matrix(shared, b);
        const double exact = trace_distance_exact(ra, rb);

        const double e = std::max(mean_energy(a), mean_energy(b));
        const double nb = std::max(mean_photon_number(a), mean_photon_number(b));
        const LowerBounds lo = lower_bounds(a, b, e);
        const double hi = upper_bound_mixed(a, b, nb);
        REQUIRE(std::max(lo.from_mean, lo.from_cov) <= exact + 2e-4);
        REQUIRE(exact <= std::min(1.0, hi) + 2e-4);
        if (pure_first) {
            const double hp = upper_bound_pure(a, b, PureBoundForm::energy, e);
            REQUIRE(exact <= std::min(1.0, hp) + 2e-4);
            const double ht = upper_bound_pure(a, b, PureBoundForm::trace_v);
            REQUIRE(exact <= std::min(1.0, ht) + 2e-4);
        }
    }
}

TEST_CASE("perturbation family scaling") {
    prng gen(88);
    GaussianState base = random_gaussian_state(1, 1.5, Purity::mixed, gen);
    const double e_max = mean_energy(base) + 0.3;  // covers the whole family
    const double n_max = e_max - 0.5;

    std::vector<double> eps_grid = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
    std::vector<double> uppers, lowers;
    for (double eps : eps_grid) {
        GaussianState shifted = base;
        shifted.V += eps * Mat::Identity(2, 2);
        uppers.push_back(upper_bound_mixed(base, shifted, n_max));
        lowers.push_back(lower_bounds(base, shifted, e_max).from_cov);
    }
    REQUIRE(loglog_slope(eps_grid, uppers) == Catch::Approx(0.5).margin(0.05));
    REQUIRE(loglog_slope(eps_grid, lowers) == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("report wrapper") {
    Vec r(2);
    r << 0.5, -0.5;
    const GaussianState a = coherent(r);
    const GaussianState b = thermal({0.7});

    BoundReport rep = bound_report(a, b);
    REQUIRE(rep.energy_budget ==
            Catch::Approx(std::max(mean_energy(a), mean_energy(b))).margin(1e-12));
    REQUIRE(rep.photon_budget ==
            Catch::Approx(std::max(mean_photon_number(a), mean_photon_number(b)))
                .margin(1e-12));
    REQUIRE(rep.upper_pure.has_value());  // coherent input is pure
    REQUIRE(clipped_upper(rep) <= 1.0);
    REQUIRE(best_lower(rep) == std::max(rep.lower_from_mean, rep.lower_from_cov));

    BoundReport mixed_only = bound_report(thermal({0.5}), b);
    REQUIRE(!mixed_only.upper_pure.has_value());

    json j = bound_report_to_json(rep);
    REQUIRE(j.contains("upper_mixed"));
    REQUIRE(j.contains("upper_pure"));
    REQUIRE(j.contains("clipped_upper"));
    REQUIRE(j["lower_from_cov"].get<double>() == rep.lower_from_cov);
}
