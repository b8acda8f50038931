// Command-line laboratory: point-source and driven-dissipative density
// estimates, block-flux experiments, flatness profiles, cluster couplings,
// and the exact Eulerian tables.
//
// Records go to --out (default stdout) as JSON lines or CSV; JSON-lines
// output ends with one summary row. Exit status is nonzero exactly when a
// deterministic invariant (conservation, flux identity) fails; cap-exceeded
// replicas are reported and skipped.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "arw/engine.hpp"
#include "arw/eulerian.hpp"
#include "arw/experiments.hpp"
#include "arw/idla.hpp"

using ojson = nlohmann::ordered_json;

namespace {

struct CommonOpts {
    std::uint64_t seed = 1;
    double lambda = 1.0;
    std::uint64_t cap = 1'000'000'000;
    std::string out;
    std::string format = "jsonl";
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--seed", c.seed, "master seed (replica r uses stream r)");
    cmd->add_option("--lambda", c.lambda, "sleep rate lambda > 0")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--cap", c.cap, "toppling cap per stabilization");
    cmd->add_option("--out", c.out, "output path (default: stdout)");
    cmd->add_option("--format", c.format, "jsonl or csv")
        ->check(CLI::IsMember({"jsonl", "csv"}));
}

// Streams records as JSON lines or CSV rows. CSV headers come from the keys
// of the first record; the summary row goes to the stream only in jsonl
// mode (stderr otherwise, to keep the CSV rectangular).
class Sink {
public:
    Sink(const std::string& path, std::string format) : format_(std::move(format)) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw std::runtime_error("cannot open output file: " + path);
            out_ = &file_;
        }
    }

    void record(const ojson& rec) {
        if (format_ == "jsonl") {
            *out_ << rec.dump() << '\n';
            return;
        }
        if (!header_done_) {
            bool first = true;
            for (auto it = rec.begin(); it != rec.end(); ++it) {
                if (!first) *out_ << ',';
                *out_ << it.key();
                first = false;
            }
            *out_ << '\n';
            header_done_ = true;
        }
        bool first = true;
        for (auto it = rec.begin(); it != rec.end(); ++it) {
            if (!first) *out_ << ',';
            if (it->is_string())
                *out_ << it->get<std::string>();
            else
                *out_ << it->dump();
            first = false;
        }
        *out_ << '\n';
    }

    void summary(const ojson& rec) {
        if (format_ == "jsonl")
            *out_ << rec.dump() << '\n';
        else
            std::cerr << rec.dump() << '\n';
    }

private:
    std::string format_;
    std::ofstream file_;
    std::ostream* out_ = &std::cout;
    bool header_done_ = false;
};

arw::PhaseOneMethod parse_method(const std::string& s) {
    if (s == "direct") return arw::PhaseOneMethod::Direct;
    if (s == "physical") return arw::PhaseOneMethod::Physical;
    return arw::PhaseOneMethod::Sampled;
}

int run_point_source(const CommonOpts& c, std::int64_t n, std::uint64_t trials,
                     const std::string& method_name) {
    Sink sink(c.out, c.format);
    arw::PhaseOneMethod method = parse_method(method_name);
    arw::RunningStat density;
    std::uint64_t cap_failures = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        std::uint64_t seed = arw::derive_seed(c.seed, t);
        try {
            arw::PointSourceRecord rec = arw::point_source_run(n, seed, c.lambda, method, c.cap);
            density.push(rec.density);
            sink.record(ojson{{"schema", "arwlab.v1.point_source"},
                              {"n", rec.n},
                              {"seed", rec.seed},
                              {"lambda", rec.lambda},
                              {"method", rec.method},
                              {"min_site", rec.min_site},
                              {"max_site", rec.max_site},
                              {"span", rec.span},
                              {"density", rec.density},
                              {"topplings", rec.topplings}});
        } catch (const arw::CapExceededError& e) {
            ++cap_failures;
            std::cerr << "replica " << t << " discarded: " << e.what() << '\n';
        }
    }
    sink.summary(ojson{{"schema", "arwlab.v1.summary"},
                       {"experiment", "point-source"},
                       {"records", density.count},
                       {"cap_exceeded", cap_failures},
                       {"mean_density", density.mean},
                       {"se", density.stderror()}});
    return 0;
}

int run_driven_dissipative(const CommonOpts& c, std::int64_t m, std::uint64_t steps,
                           std::uint64_t burn_in, const std::string& placement_name,
                           arw::Site site, bool series) {
    Sink sink(c.out, c.format);
    arw::Placement placement =
        placement_name == "fixed" ? arw::Placement::Fixed : arw::Placement::Uniform;
    arw::DrivenDissipativeRecord rec = arw::driven_dissipative_run(
        m, steps, burn_in, c.seed, c.lambda, placement, site, series, c.cap);
    ojson j{{"schema", "arwlab.v1.driven_dissipative"},
            {"m", rec.m},
            {"steps", rec.steps},
            {"burn_in", rec.burn_in},
            {"seed", rec.seed},
            {"lambda", rec.lambda},
            {"placement", placement_name},
            {"fixed_site", rec.fixed_site},
            {"rho_dd_hat", rec.rho_dd_hat},
            {"se", rec.se},
            {"topplings", rec.topplings}};
    if (series && c.format == "jsonl") j["n_series"] = rec.n_series;
    sink.record(j);
    sink.summary(ojson{{"schema", "arwlab.v1.summary"},
                       {"experiment", "driven-dissipative"},
                       {"records", 1},
                       {"rho_dd_hat", rec.rho_dd_hat},
                       {"se", rec.se}});
    return 0;
}

int run_block(const CommonOpts& c, std::int64_t n, arw::Site i, double gamma, double eps,
              std::uint64_t trials, const std::string& method_name) {
    Sink sink(c.out, c.format);
    arw::PhaseOneMethod method = parse_method(method_name);
    std::uint64_t cap_failures = 0, identity_failures = 0, bulk_failures = 0;
    arw::RunningStat block_density;
    for (std::uint64_t t = 0; t < trials; ++t) {
        std::uint64_t seed = arw::derive_seed(c.seed, t);
        try {
            arw::BlockExperimentRecord rec =
                arw::block_experiment(n, i, gamma, seed, c.lambda, method, eps, c.cap);
            if (!rec.identity_holds) ++identity_failures;
            if (!rec.bulk_ok) ++bulk_failures;
            block_density.push(static_cast<double>(rec.d_global) /
                               static_cast<double>(rec.block_hi - rec.block_lo + 1));
            sink.record(ojson{{"schema", "arwlab.v1.block"},
                              {"n", rec.n},
                              {"i", rec.i},
                              {"gamma", rec.gamma},
                              {"seed", rec.seed},
                              {"lambda", rec.lambda},
                              {"method", rec.method},
                              {"block_lo", rec.block_lo},
                              {"block_hi", rec.block_hi},
                              {"a_star", rec.a_star},
                              {"b_star", rec.b_star},
                              {"d_global", rec.d_global},
                              {"d_replayed", rec.d_replayed},
                              {"identity_holds", rec.identity_holds},
                              {"bulk_ok", rec.bulk_ok},
                              {"span", rec.span},
                              {"density", static_cast<double>(rec.n) /
                                              static_cast<double>(rec.span)},
                              {"topplings", rec.topplings}});
        } catch (const arw::CapExceededError& e) {
            ++cap_failures;
            std::cerr << "replica " << t << " discarded: " << e.what() << '\n';
        }
    }
    sink.summary(ojson{{"schema", "arwlab.v1.summary"},
                       {"experiment", "block"},
                       {"records", block_density.count},
                       {"cap_exceeded", cap_failures},
                       {"identity_failures", identity_failures},
                       {"bulk_failures", bulk_failures},
                       {"mean_block_density", block_density.mean},
                       {"se", block_density.stderror()}});
    if (identity_failures > 0) {
        std::cerr << "deterministic flux identity failed on " << identity_failures
                  << " realization(s)\n";
        return 1;
    }
    return 0;
}

int run_flatness(const CommonOpts& c, std::int64_t n, arw::Site window, std::uint64_t trials,
                 const std::string& method_name) {
    Sink sink(c.out, c.format);
    if (window <= 0) window = n / 5;
    arw::FlatnessProfile prof = arw::flatness_profile(
        n, -window, window, trials, c.seed, c.lambda, parse_method(method_name), c.cap);
    for (std::size_t j = 0; j < prof.p_hat.size(); ++j)
        sink.record(ojson{{"schema", "arwlab.v1.flatness"},
                          {"n", prof.n},
                          {"site", prof.win_lo + static_cast<arw::Site>(j)},
                          {"p_hat", prof.p_hat[j]},
                          {"se", prof.se[j]}});
    sink.summary(ojson{{"schema", "arwlab.v1.summary"},
                       {"experiment", "flatness"},
                       {"trials", prof.trials},
                       {"window_lo", prof.win_lo},
                       {"window_hi", prof.win_hi},
                       {"max_adjacent_diff", prof.max_adjacent_diff},
                       {"window_mean", prof.window_mean},
                       {"window_sleepers", prof.window_sleepers}});
    return 0;
}

int run_couple(const CommonOpts& c, int n, std::uint64_t trials) {
    Sink sink(c.out, c.format);
    arw::ShiftCoupler coupler(n);
    std::mt19937_64 rng(c.seed);
    std::uint64_t coincided = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        arw::ClusterCouplingOutcome out = arw::couple_clusters(coupler, rng);
        coincided += out.coincide;
        sink.record(ojson{{"schema", "arwlab.v1.couple"},
                          {"n", n},
                          {"seed", c.seed},
                          {"replica", t},
                          {"K0", out.K0},
                          {"K1", out.K1},
                          {"coincide", out.coincide}});
    }
    double freq = trials == 0 ? 0.0 : static_cast<double>(coincided) / static_cast<double>(trials);
    sink.summary(ojson{{"schema", "arwlab.v1.summary"},
                       {"experiment", "couple"},
                       {"records", trials},
                       {"coincidence_freq", freq},
                       {"coincidence_exact", 1.0 - coupler.tv()},
                       {"tv", coupler.tv()}});
    return 0;
}

int run_eulerian(const CommonOpts& c, int n) {
    Sink sink(c.out, c.format);
    arw::EulerianDist dist = arw::EulerianDist::for_n(n);
    for (int k = 0; k < n; ++k) {
        ojson rec{{"schema", "arwlab.v1.eulerian"}, {"n", n}, {"k", k}};
        if (dist.exact_mode())
            rec["count"] = arw::eulerian_number(n, k).str();
        rec["mass"] = dist.mass(k);
        sink.record(rec);
    }
    arw::TvShiftResult tv = arw::tv_shift(dist);
    sink.summary(ojson{{"schema", "arwlab.v1.summary"},
                       {"experiment", "eulerian"},
                       {"n", n},
                       {"mode_index", dist.mode_index()},
                       {"max_mass", dist.mass(dist.mode_index())},
                       {"sqrt_n_scaled", std::sqrt(static_cast<double>(n)) *
                                             dist.mass(dist.mode_index())},
                       {"tv_shift", tv.value},
                       {"normal_cdf_gap", arw::normal_cdf_gap(n)}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"activated random walk laboratory"};
    app.require_subcommand(1);

    CommonOpts c;

    std::int64_t n = 100;
    std::int64_t m = 100;
    std::uint64_t trials = 100;
    std::uint64_t burn_in = 0;
    arw::Site i = 0;
    arw::Site site = -1;
    arw::Site window = 0;
    double gamma = 0.4;
    double eps = 0.2;
    bool series = false;
    std::string method = "direct";
    std::string placement = "uniform";

    auto* ps = app.add_subcommand("point-source", "stabilize n particles at the origin");
    add_common(ps, c);
    ps->add_option("--n", n, "particle count")->required()->check(CLI::PositiveNumber);
    ps->add_option("--trials", trials, "replicas");
    ps->add_option("--method", method, "direct | physical | sampled")
        ->check(CLI::IsMember({"direct", "physical", "sampled"}));

    auto* dd = app.add_subcommand("driven-dissipative",
                                  "add-then-stabilize chain on [0,m] with sinks");
    add_common(dd, c);
    dd->add_option("--m", m, "rightmost site of the volume [0,m]")->required();
    dd->add_option("--trials", trials, "chain steps");
    dd->add_option("--burn-in", burn_in, "steps discarded (default 20%)");
    dd->add_option("--placement", placement, "uniform | fixed")
        ->check(CLI::IsMember({"uniform", "fixed"}));
    dd->add_option("--site", site, "fixed placement site (default middle)");
    dd->add_flag("--series", series, "include the N time series (jsonl only)");

    auto* bl = app.add_subcommand("block", "two-phase flux identity experiment");
    add_common(bl, c);
    bl->add_option("--n", n, "particle count")->required()->check(CLI::PositiveNumber);
    bl->add_option("--i", i, "block right end (source offset)");
    bl->add_option("--gamma", gamma, "block width exponent in (0,1)");
    bl->add_option("--eps", eps, "bulk margin in (0,1)");
    bl->add_option("--trials", trials, "replicas");
    bl->add_option("--method", method, "physical | sampled")
        ->check(CLI::IsMember({"physical", "sampled"}))
        ->default_val("physical");

    auto* fl = app.add_subcommand("flatness", "sleeping-probability profile");
    add_common(fl, c);
    fl->add_option("--n", n, "particle count")->required()->check(CLI::PositiveNumber);
    fl->add_option("--window", window, "profile window [-w, w] (default n/5)");
    fl->add_option("--trials", trials, "replicas");
    fl->add_option("--method", method, "direct | physical | sampled")
        ->check(CLI::IsMember({"direct", "physical", "sampled"}))
        ->default_val("sampled");

    auto* cp = app.add_subcommand("couple", "maximal coupling of neighboring clusters");
    add_common(cp, c);
    cp->add_option("--n", n, "cluster size")->required()->check(CLI::PositiveNumber);
    cp->add_option("--trials", trials, "replicas");

    auto* eu = app.add_subcommand("eulerian", "descent-law tables and diagnostics");
    add_common(eu, c);
    eu->add_option("--n", n, "permutation length")->required()->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ps->parsed()) return run_point_source(c, n, trials, method);
        if (dd->parsed()) return run_driven_dissipative(c, m, trials, burn_in, placement, site, series);
        if (bl->parsed()) return run_block(c, n, i, gamma, eps, trials, method);
        if (fl->parsed()) return run_flatness(c, n, window, trials, method);
        if (cp->parsed()) return run_couple(c, static_cast<int>(n), trials);
        if (eu->parsed()) return run_eulerian(c, static_cast<int>(n));
    } catch (const std::logic_error& e) {
        std::cerr << "deterministic invariant violated: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
