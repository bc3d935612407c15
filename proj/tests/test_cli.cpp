#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <string>
#include <sys/wait.h>

#include "cvtomo/json_io.hpp"

using namespace cvtomo;
using Catch::Approx;

namespace {

struct RunResult {
    int code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd =
        std::string("\"") + CVTOMO_BIN_PATH + "\" " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, got);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string write_state(const std::string& name, const GaussianState& s) {
    const std::string path = "/tmp/cvtomo_cli_" + name + ".json";
    save_gaussian_state(path, s);
    return path;
}

}  // namespace

TEST_CASE("williamson subcommand") {
    const std::string vac = write_state("vac", vacuum(1));
    const RunResult r = run_cli("williamson " + vac);
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j.at("n") == 1);
    CHECK(j.at("d")[0].get<double>() == Approx(1.0).margin(1e-12));
    CHECK(j.at("S")[0][0].get<double>() == Approx(1.0).margin(1e-12));
    CHECK(j.at("S")[0][1].get<double>() == Approx(0.0).margin(1e-12));
    CHECK(j.at("reconstruction_residual").get<double>() < 1e-12);
    CHECK(j.at("symplectic_residual").get<double>() < 1e-12);
}

TEST_CASE("bounds subcommand with oracle") {
    const std::string vac = write_state("vac", vacuum(1));
    const std::string th = write_state("th1", thermal({1.0}));
    const RunResult r = run_cli("bounds " + vac + " " + th + " --oracle");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j.at("lower_from_cov").get<double>() ==
          Approx(0.0020203050891044214).epsilon(1e-9));
    CHECK(j.at("exact_distance").get<double>() == Approx(0.5).margin(1e-6));
    CHECK(j.at("clipped_upper").get<double>() == 1.0);
    CHECK(j.at("oracle_truncation").get<double>() < 1e-8);
    const double lo = j.at("lower_from_cov").get<double>();
    const double ex = j.at("exact_distance").get<double>();
    CHECK(lo <= ex);
    CHECK(ex <= j.at("clipped_upper").get<double>());
}

TEST_CASE("exit codes") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("williamson").code == 2);
    CHECK(run_cli("bounds-table --no-such-flag x").code == 2);
    CHECK(run_cli("williamson /tmp/cvtomo_cli_absent.json").code == 5);

    const std::string broken = "/tmp/cvtomo_cli_broken.json";
    FILE* f = fopen(broken.c_str(), "w");
    REQUIRE(f != nullptr);
    fputs("{\"n\": 1, \"mean\": [0", f);
    fclose(f);
    CHECK(run_cli("williamson " + broken).code == 5);

    // copy budget too small to fill the estimation bins
    CHECK(run_cli("simulate-tomography --pipeline gaussian --trials 2 "
                  "--copies 10 --seed 1")
              .code == 3);

    // far-displaced state with a filter window it cannot pass
    GaussianState far = vacuum(1);
    far.m(0) = 9.0;
    const std::string far_path = write_state("far", far);
    CHECK(run_cli("simulate-tomography --pipeline moment --trials 2 "
                  "--copies 500 --seed 1 --eps 0.9 --nphot 0.01 --state " +
                  far_path)
              .code == 4);
}

TEST_CASE("simulate-tomography determinism") {
    const std::string args =
        "simulate-tomography --pipeline gaussian --trials 5 --copies 3000 "
        "--seed 77";
    const RunResult a = run_cli(args + " --threads 1");
    const RunResult b = run_cli(args + " --threads 3");
    const RunResult c = run_cli(args + " --threads 1");
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out == c.out);

    const std::size_t eol = a.out.find('\n');
    REQUIRE(eol != std::string::npos);
    CHECK(a.out.substr(0, eol) ==
          "trial,stream_seed,copies_used,trace_distance,success,"
          "epsilon_prime,theory_distance_bound");
    int rows = 0;
    for (char ch : a.out)
        if (ch == '\n') ++rows;
    CHECK(rows == 6);  // header + 5 trials

    // moment pipeline goes through the same pool machinery
    const std::string margs =
        "simulate-tomography --pipeline moment --trials 3 --copies 2000 "
        "--seed 9";
    const RunResult m1 = run_cli(margs + " --threads 2");
    const RunResult m2 = run_cli(margs + " --threads 1");
    REQUIRE(m1.code == 0);
    CHECK(m1.out == m2.out);
}

TEST_CASE("bounds-table subcommand") {
    const std::string args =
        "bounds-table --grid \"n=1,2;k=1;eps=0.5,0.1;delta=0.1;nphot=1\"";
    const RunResult a = run_cli(args);
    const RunResult b = run_cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);

    const std::size_t eol = a.out.find('\n');
    CHECK(a.out.substr(0, eol) ==
          "n,k,epsilon,delta,nphot,effective_dimension,effective_rank,"
          "lower_bound_pure,lower_bound_mixed,upper_counts_pure,"
          "upper_counts_mixed");
    int rows = 0;
    for (char ch : a.out)
        if (ch == '\n') ++rows;
    CHECK(rows == 5);  // header + 2x1x2x1x1 grid points

    CHECK(run_cli("bounds-table --grid \"bogus=1\"").code == 5);
}

TEST_CASE("synth subcommand") {
    const std::string args = "synth --t 1 --kappa 1 --n 2 --seed 9";
    const RunResult a = run_cli(args);
    const RunResult b = run_cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);

    const json j = json::parse(a.out);
    CHECK(j.at("n") == 2);
    CHECK(j.at("t") == 1);
    CHECK(j.at("kappa") == 1);
    CHECK(j.at("state").at("modes") == 2);
    CHECK(j.at("state").at("deficit").get<double>() <= 1e-10);
    CHECK(j.at("ground_truth").at("t") == 1);
    CHECK(j.at("moments").at("cov").size() == 4);

    // degenerate request: kappa t exceeding the mode count
    CHECK(run_cli("synth --t 2 --kappa 2 --n 2 --seed 1").code == 3);
}
