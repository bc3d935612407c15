#include <CLI11.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cvtomo/bounds.hpp"
#include "cvtomo/complexity.hpp"
#include "cvtomo/json_io.hpp"
#include "cvtomo/pipelines.hpp"

namespace {

using namespace cvtomo;

// Shortest round-trip decimal form; keeps CSV output byte-stable across runs.
std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt(std::int64_t v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt(std::uint64_t v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

int resolve_threads(int flag_value) {
    if (flag_value > 0) return std::min(flag_value, 64);
    if (const char* env = std::getenv("CVTOMO_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return std::min(v, 64);
    }
    return 1;
}

int cmd_williamson(const std::string& path) {
    const GaussianState s = load_gaussian_state(path);
    const SymplecticDecomposition w = williamson(s.V);
    Mat dd = Mat::Zero(2 * s.n, 2 * s.n);
    for (int j = 0; j < s.n; ++j) dd(2 * j, 2 * j) = dd(2 * j + 1, 2 * j + 1) = w.d(j);
    const Mat om = symplectic_form(s.n);
    json out;
    out["n"] = s.n;
    out["S"] = mat_to_json(w.S);
    out["d"] = vec_to_json(w.d);
    out["reconstruction_residual"] = max_abs(w.S * dd * w.S.transpose() - s.V);
    out["symplectic_residual"] = max_abs(w.S * om * w.S.transpose() - om);
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_bounds(const std::string& p1, const std::string& p2, bool oracle) {
    const GaussianState a = load_gaussian_state(p1);
    const GaussianState b = load_gaussian_state(p2);
    const BoundReport r = bound_report(a, b);
    json out = bound_report_to_json(r);
    if (oracle) {
        const FockDensity ra = gaussian_density_auto(a, 1e-8);
        const FockDensity rb = gaussian_density_auto(b, 1e-8);
        out["exact_distance"] = trace_distance_embedded(ra, rb);
        out["oracle_truncation"] = std::max(ra.deficit, rb.deficit);
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

struct TrialRow {
    std::int64_t trial = 0;
    std::uint64_t stream = 0;
    std::int64_t copies_used = 0;
    double distance = std::numeric_limits<double>::quiet_NaN();
    int success = 0;
    double extra0 = std::numeric_limits<double>::quiet_NaN();
    double extra1 = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
};

struct SimulateConfig {
    std::string pipeline;
    std::int64_t trials = 0;
    std::int64_t copies = 0;
    std::uint64_t seed = 0;
    int threads = 0;
    double eps = 0.2;
    double delta = 0.1;
    std::string state_path;
    double energy_budget = 0.0;  // 0: derive from the state
    bool pure = false;
    int k = 1;
    double nphot = 0.0;  // 0: derive from the state
    int n = 2;
    int t = 1;
    int kappa = 1;
    double energy_cap = 5.0;
};

// Run `trials` independent jobs over a worker pool.  Each job owns the output
// slot for its index, so the printed table is identical for any pool size.
template <typename Job>
void run_pool(std::int64_t trials, int threads, std::vector<TrialRow>& rows,
              Job&& job) {
    std::atomic<std::int64_t> next{0};
    std::mutex err_mtx;
    std::exception_ptr first_err;
    auto worker = [&] {
        for (;;) {
            const std::int64_t i = next.fetch_add(1);
            if (i >= trials) return;
            try {
                rows[i] = job(i);
            } catch (const pipeline_failure&) {
                rows[i].trial = i;
                rows[i].failed = true;
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mtx);
                if (!first_err) first_err = std::current_exception();
                return;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_err) std::rethrow_exception(first_err);
}

void print_rows(const std::string& header, const std::vector<TrialRow>& rows,
                std::uint64_t seed) {
    std::string out = header;
    out += "\n";
    for (const TrialRow& r : rows) {
        out += fmt(r.trial);
        out += ",";
        out += fmt(stream_seed(seed, static_cast<std::uint64_t>(r.trial)));
        out += ",";
        out += fmt(r.copies_used);
        out += ",";
        out += fmt(r.distance);
        out += ",";
        out += fmt(static_cast<std::int64_t>(r.success));
        out += ",";
        out += fmt(r.extra0);
        out += ",";
        out += fmt(r.extra1);
        out += "\n";
    }
    std::cout << out;
}

int cmd_simulate(const SimulateConfig& cfg) {
    const int threads = resolve_threads(cfg.threads);
    std::vector<TrialRow> rows(cfg.trials);

    if (cfg.pipeline == "gaussian" || cfg.pipeline == "moment") {
        const GaussianState truth = cfg.state_path.empty()
                                        ? thermal({1.0})
                                        : load_gaussian_state(cfg.state_path);
        const double per_mode_energy =
            cfg.energy_budget > 0.0
                ? cfg.energy_budget
                : mean_energy(truth) / truth.n * 1.02;
        const FockDensity oracle = gaussian_density_auto(truth, 1e-8);

        if (cfg.pipeline == "gaussian") {
            run_pool(cfg.trials, threads, rows, [&](std::int64_t i) {
                StateSource src(truth);
                prng gen(stream_seed(cfg.seed, static_cast<std::uint64_t>(i)));
                GaussianPipelineOptions opts;
                opts.copies = cfg.copies;
                opts.pure = cfg.pure;
                TomographyReport rep = gaussian_tomography(
                    src, truth.n, cfg.eps, cfg.delta, per_mode_energy, gen, opts);
                TrialRow row;
                row.trial = i;
                row.copies_used = rep.copies_used;
                row.distance = stamp_oracle_distance(rep, oracle);
                row.success = row.distance <= cfg.eps ? 1 : 0;
                row.extra0 = rep.diagnostics.at("epsilon_prime");
                row.extra1 = rep.diagnostics.at("theory_distance_bound");
                return row;
            });
            print_rows(
                "trial,stream_seed,copies_used,trace_distance,success,"
                "epsilon_prime,theory_distance_bound",
                rows, cfg.seed);
        } else {
            const double nphot = cfg.nphot > 0.0
                                     ? cfg.nphot
                                     : std::max(0.5, mean_photon_number(truth));
            run_pool(cfg.trials, threads, rows, [&](std::int64_t i) {
                prng gen(stream_seed(cfg.seed, static_cast<std::uint64_t>(i)));
                TomographyReport rep = moment_constrained_tomography(
                    oracle, truth.n, cfg.k, cfg.eps, cfg.delta, nphot, cfg.pure,
                    cfg.copies, gen);
                TrialRow row;
                row.trial = i;
                row.copies_used = rep.copies_used;
                row.distance = stamp_oracle_distance(rep, oracle);
                row.success = row.distance <= cfg.eps ? 1 : 0;
                row.extra0 = rep.diagnostics.at("retention_expected");
                row.extra1 = rep.diagnostics.at("retained_fraction");
                return row;
            });
            print_rows(
                "trial,stream_seed,copies_used,trace_distance,success,"
                "retention_expected,retained_fraction",
                rows, cfg.seed);
        }
    } else if (cfg.pipeline == "tcomp") {
        prng synth_gen(stream_seed(cfg.seed, std::uint64_t(1) << 32));
        const DopedSynthesis fixture =
            synth_t_doped(cfg.n, cfg.t, cfg.kappa, synth_gen, cfg.energy_cap);
        const int t_tom = cfg.t * cfg.kappa;
        const double e2 = cfg.energy_budget > 0.0
                              ? cfg.energy_budget
                              : std::sqrt(fock_energy_second_moment(
                                    fixture.state)) /
                                    cfg.n * 1.02;
        run_pool(cfg.trials, threads, rows, [&](std::int64_t i) {
            prng gen(stream_seed(cfg.seed, static_cast<std::uint64_t>(i)));
            TomographyReport rep = t_compressible_tomography(
                fixture.state, cfg.n, t_tom, cfg.eps, cfg.delta, e2, cfg.copies,
                gen);
            TrialRow row;
            row.trial = i;
            row.copies_used = rep.copies_used;
            row.distance = stamp_oracle_distance(rep, fixture.state);
            row.success = row.distance <= cfg.eps ? 1 : 0;
            row.extra0 = rep.diagnostics.at("post_selection_rate");
            row.extra1 = rep.diagnostics.at("head_trim_weight");
            return row;
        });
        print_rows(
            "trial,stream_seed,copies_used,trace_distance,success,"
            "post_selection_rate,head_trim_weight",
            rows, cfg.seed);
    } else {
        std::cerr << "unknown pipeline: " << cfg.pipeline << "\n";
        return 2;
    }

    std::int64_t failures = 0;
    for (const TrialRow& r : rows)
        if (r.failed) ++failures;
    if (failures == cfg.trials && cfg.trials > 0) {
        std::cerr << "all " << failures << " trials declared failure\n";
        return 4;
    }
    return 0;
}

// Grid spec: semicolon-separated "key=v1,v2,..." groups, e.g.
//   "n=1,2;k=1;eps=0.5,0.1;delta=0.1;nphot=1,2"
struct GridSpec {
    std::vector<int> n{1};
    std::vector<int> k{1};
    std::vector<double> eps{0.1};
    std::vector<double> delta{0.1};
    std::vector<double> nphot{1.0};
};

GridSpec parse_grid(const std::string& spec) {
    GridSpec g;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        const std::size_t end = spec.find(';', pos);
        const std::string group =
            spec.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        pos = end == std::string::npos ? spec.size() : end + 1;
        if (group.empty()) continue;
        const std::size_t eq = group.find('=');
        if (eq == std::string::npos)
            throw io_error("grid group missing '=': " + group);
        const std::string key = group.substr(0, eq);
        std::vector<double> vals;
        std::size_t vp = eq + 1;
        while (vp <= group.size()) {
            const std::size_t comma = group.find(',', vp);
            const std::string tok = group.substr(
                vp, comma == std::string::npos ? std::string::npos : comma - vp);
            if (tok.empty()) throw io_error("empty value in grid group: " + group);
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw io_error("bad grid value: " + tok);
            }
            if (comma == std::string::npos) break;
            vp = comma + 1;
        }
        if (vals.empty()) throw io_error("empty grid group: " + group);
        if (key == "n" || key == "k") {
            std::vector<int> iv;
            for (double v : vals) {
                if (v != std::floor(v) || v < 1)
                    throw io_error("grid group " + key + " needs positive integers");
                iv.push_back(static_cast<int>(v));
            }
            (key == "n" ? g.n : g.k) = iv;
        } else if (key == "eps") {
            g.eps = vals;
        } else if (key == "delta") {
            g.delta = vals;
        } else if (key == "nphot") {
            g.nphot = vals;
        } else {
            throw io_error("unknown grid key: " + key);
        }
    }
    return g;
}

int cmd_bounds_table(const std::string& spec) {
    const GridSpec g = parse_grid(spec);
    std::string out =
        "n,k,epsilon,delta,nphot,effective_dimension,effective_rank,"
        "lower_bound_pure,lower_bound_mixed,upper_counts_pure,"
        "upper_counts_mixed\n";
    for (int n : g.n)
        for (int k : g.k)
            for (double eps : g.eps)
                for (double delta : g.delta)
                    for (double nphot : g.nphot) {
                        const DimensionBound dim =
                            effective_dimension(n, k, eps, nphot);
                        const DimensionBound rnk =
                            effective_rank(n, k, eps, nphot);
                        out += fmt(std::int64_t(n)) + "," + fmt(std::int64_t(k)) +
                               "," + fmt(eps) + "," + fmt(delta) + "," +
                               fmt(nphot) + "," + fmt(dim.count) + "," +
                               fmt(rnk.count) + "," +
                               fmt(lower_bound_pure(n, k, eps, delta, nphot)) +
                               "," +
                               fmt(lower_bound_mixed(n, k, eps, delta, nphot)) +
                               "," +
                               fmt(upper_bound_counts(n, k, eps, delta, nphot,
                                                      true)
                                       .count) +
                               "," +
                               fmt(upper_bound_counts(n, k, eps, delta, nphot,
                                                      false)
                                       .count) +
                               "\n";
                    }
    std::cout << out;
    return 0;
}

int cmd_synth(int n, int t, int kappa, std::uint64_t seed, double cap,
              const std::string& out_path) {
    prng gen(stream_seed(seed, 0));
    const DopedSynthesis out = synth_t_doped(n, t, kappa, gen, cap);
    json j;
    j["n"] = n;
    j["t"] = t;
    j["kappa"] = kappa;
    j["seed"] = seed;
    j["state"] = fock_density_to_json(out.state);
    j["ground_truth"] = compressed_estimate_to_json(out.truth);
    StateSource src(out.state);
    j["moments"] = state_to_json(src.moments());
    if (out_path.empty())
        std::cout << j.dump(2) << "\n";
    else
        save_json(out_path, j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-variable state tomography workbench"};
    app.require_subcommand(1);

    std::string will_path;
    CLI::App* will = app.add_subcommand(
        "williamson", "normal-mode decomposition of a covariance file");
    will->add_option("state", will_path, "Gaussian state JSON {n, mean, cov}")
        ->required();

    std::string b1, b2;
    bool b_oracle = false;
    CLI::App* bnd = app.add_subcommand(
        "bounds", "trace-distance bounds between two Gaussian state files");
    bnd->add_option("state1", b1, "first state JSON")->required();
    bnd->add_option("state2", b2, "second state JSON")->required();
    bnd->add_flag("--oracle", b_oracle,
                  "also compute the truncated-space exact distance");

    SimulateConfig sim;
    CLI::App* st = app.add_subcommand(
        "simulate-tomography", "run seeded tomography trials, emit CSV");
    st->add_option("--pipeline", sim.pipeline, "gaussian | moment | tcomp")
        ->required();
    st->add_option("--trials", sim.trials, "number of independent trials")
        ->required()
        ->check(CLI::PositiveNumber);
    st->add_option("--copies", sim.copies, "copy budget per trial")
        ->required()
        ->check(CLI::PositiveNumber);
    st->add_option("--seed", sim.seed, "base seed; trial i uses stream i")
        ->required();
    st->add_option("--threads", sim.threads,
                   "worker count (default: CVTOMO_THREADS or 1)");
    st->add_option("--eps", sim.eps, "target accuracy (default 0.2)");
    st->add_option("--delta", sim.delta, "failure budget (default 0.1)");
    st->add_option("--state", sim.state_path,
                   "input state JSON (default: one-mode thermal, unit occupation)");
    st->add_option("--energy-budget", sim.energy_budget,
                   "per-mode energy budget (default: derived from the state)");
    st->add_flag("--pure", sim.pure, "assume a pure target");
    st->add_option("--k", sim.k, "photon-moment order for the moment pipeline");
    st->add_option("--nphot", sim.nphot,
                   "photon-moment budget (default: derived from the state)");
    st->add_option("--n", sim.n, "mode count for tcomp synthesis (default 2)");
    st->add_option("--t", sim.t, "doped-mode parameter for tcomp (default 1)");
    st->add_option("--kappa", sim.kappa, "dilution factor for tcomp (default 1)");
    st->add_option("--energy-cap", sim.energy_cap,
                   "synthesis energy cap for tcomp (default 5)");

    std::string grid;
    CLI::App* bt = app.add_subcommand(
        "bounds-table", "sample-complexity bounds over a parameter grid, CSV");
    bt->add_option("--grid", grid,
                   "semicolon groups, e.g. n=1,2;k=1;eps=0.5,0.1;delta=0.1;nphot=1")
        ->required();

    int sy_n = 2, sy_t = 1, sy_kappa = 1;
    std::uint64_t sy_seed = 0;
    double sy_cap = 5.0;
    std::string sy_out;
    CLI::App* sy = app.add_subcommand(
        "synth", "synthesize a doped state plus its ground truth");
    sy->add_option("--t", sy_t, "doped-mode parameter")->required();
    sy->add_option("--kappa", sy_kappa, "dilution factor")->required();
    sy->add_option("--n", sy_n, "mode count (default 2)");
    sy->add_option("--seed", sy_seed, "synthesis seed")->required();
    sy->add_option("--energy-cap", sy_cap, "energy cap (default 5)");
    sy->add_option("--out", sy_out, "output path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (will->parsed()) return cmd_williamson(will_path);
        if (bnd->parsed()) return cmd_bounds(b1, b2, b_oracle);
        if (st->parsed()) return cmd_simulate(sim);
        if (bt->parsed()) return cmd_bounds_table(grid);
        if (sy->parsed()) return cmd_synth(sy_n, sy_t, sy_kappa, sy_seed, sy_cap, sy_out);
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 5;
    } catch (const pipeline_failure& e) {
        std::cerr << "pipeline failure: " << e.what() << "\n";
        return 4;
    } catch (const numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
