// Measured quantities: point-source density, driven-dissipative density,
// block fluxes with the deterministic flux identity, and sleeping-site
// profiles.
//
// Two-phase runs come in two flavors. "Physical" performs the flattening
// topplings instruction by instruction. "Sampled" draws the flattening
// extent K from its exact law (the eulerian module) and starts Phase 2 from
// the corresponding interval on fresh stacks; the residual stacks after a
// physical flattening are themselves fresh and independent of K, so the two
// flavors produce the same law, and the physical flavor is kept for
// cross-checks at sizes where its n^3 toppling cost is payable.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arw/config.hpp"
#include "arw/engine.hpp"
#include "arw/eulerian.hpp"
#include "arw/idla.hpp"

namespace arw {

// Mean / standard error accumulator (Welford).
struct RunningStat {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void push(double x) {
        ++count;
        double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }
    double variance() const { return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1); }
    double stderror() const;
};

enum class PhaseOneMethod {
    Direct,    // no phases: stabilize n*delta_0 in one go
    Physical,  // flatten by toppling, then Phase 2 on the same stacks
    Sampled,   // draw K exactly, Phase 2 from the interval on fresh stacks
};

const char* to_string(PhaseOneMethod m);

struct PointSourceRecord {
    std::int64_t n = 0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    std::string method;
    Site min_site = 0;  // extremes of the sleeper support
    Site max_site = 0;
    std::int64_t span = 0;   // smallest interval containing all sleepers
    double density = 0.0;    // n / span
    std::uint64_t topplings = 0;
};

// Stabilize n particles at the origin and measure the sleeper interval.
// Throws std::logic_error if the final state does not hold exactly n
// sleepers (conservation is deterministic).
PointSourceRecord point_source_run(std::int64_t n, std::uint64_t seed, double lambda,
                                   PhaseOneMethod method = PhaseOneMethod::Direct,
                                   std::uint64_t cap = 1'000'000'000);

enum class Placement { Uniform, Fixed };

struct DrivenDissipativeRecord {
    std::int64_t m = 0;
    std::uint64_t steps = 0;
    std::uint64_t burn_in = 0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    Placement placement = Placement::Uniform;
    Site fixed_site = 0;
    double rho_dd_hat = 0.0;  // mean of N/(m+1) past burn-in
    double se = 0.0;          // batch-means standard error
    std::uint64_t topplings = 0;
    std::vector<std::int64_t> n_series;  // N after each step (kept if requested)
};

// Add-then-stabilize chain on [0, m] with sinks at -1 and m+1. burn_in = 0
// picks the default of 20% of steps.
DrivenDissipativeRecord driven_dissipative_run(std::int64_t m, std::uint64_t steps,
                                               std::uint64_t burn_in, std::uint64_t seed,
                                               double lambda,
                                               Placement placement = Placement::Uniform,
                                               Site fixed_site = -1,  // -1: middle
                                               bool keep_series = false,
                                               std::uint64_t cap = 1'000'000'000);

struct BlockExperimentRecord {
    std::int64_t n = 0;
    Site i = 0;
    double gamma = 0.0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    std::string method;
    Site block_lo = 0;  // [i - floor(n^gamma), i]
    Site block_hi = 0;
    std::uint64_t a_star = 0;  // Right instructions consumed at block_lo - 1
    std::uint64_t b_star = 0;  // Left instructions consumed at block_hi + 1
    std::int64_t d_global = 0;    // particles in the block, global final
    std::int64_t d_replayed = 0;  // particles left by the finite-volume replay
    bool identity_holds = false;
    bool bulk_ok = false;  // Phase 1 left one active particle on every block site
    Site global_min_site = 0;   // sleeper extremes of the global final; the
    Site global_max_site = 0;   // global run doubles as a point-source run
    std::int64_t span = 0;
    std::uint64_t topplings = 0;
};

// Two-phase block experiment. Phase 2 runs block-first while counting the
// boundary fluxes; the finite-volume replay restores the Phase-2 cursor
// snapshot and stabilizes omega|block + a*delta_L + b*delta_R with sinks.
// The identity d_global == d_replayed holds on every realization.
BlockExperimentRecord block_experiment(std::int64_t n, Site i, double gamma,
                                       std::uint64_t seed, double lambda,
                                       PhaseOneMethod method = PhaseOneMethod::Physical,
                                       double eps = 0.2,
                                       std::uint64_t cap = 1'000'000'000);

struct FlatnessProfile {
    std::int64_t n = 0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    Site win_lo = 0;
    Site win_hi = 0;
    std::vector<double> p_hat;  // P(eta(i) = s), indexed by i - win_lo
    std::vector<double> se;
    std::uint64_t window_sleepers = 0;  // sum of sleeper indicators in window
    double max_adjacent_diff = 0.0;
    double window_mean = 0.0;
};

// Monte Carlo sleeping probabilities over [win_lo, win_hi] from point-source
// runs at the origin.
FlatnessProfile flatness_profile(std::int64_t n, Site win_lo, Site win_hi,
                                 std::uint64_t trials, std::uint64_t seed, double lambda,
                                 PhaseOneMethod method = PhaseOneMethod::Sampled,
                                 std::uint64_t cap = 1'000'000'000);

}  // namespace arw
