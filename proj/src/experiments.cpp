#include "arw/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <stdexcept>

namespace arw {

namespace {

// Seed streams consumed by one experiment record.
enum : std::uint64_t {
    stream_stacks = 0,
    stream_extent = 1,
    stream_phase2 = 2,
    stream_placement = 3,
};

// Building an exact extent sampler costs a full big-integer triangle row, so
// replica loops share one per n. Replicas are single-threaded by design (the
// scheduler above them is a process fan-out), hence no locking.
const EulerianSampler& cached_sampler(int n) {
    static std::map<int, EulerianSampler> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, EulerianSampler(n)).first;
    return it->second;
}

// Global stabilization of the point source by the chosen method, returning
// the final configuration and total topplings spent.
std::pair<Configuration, std::uint64_t> settle_point_source(
    std::int64_t n, std::uint64_t seed, double lambda, PhaseOneMethod method,
    std::uint64_t cap) {
    StabOptions opts;
    opts.cap = cap;
    switch (method) {
        case PhaseOneMethod::Direct: {
            StackSource src(derive_seed(seed, stream_stacks), lambda);
            StabResult r = stabilize(Configuration::point_source(0, n), src, opts);
            return {std::move(r.final_config), r.topplings};
        }
        case PhaseOneMethod::Physical: {
            StackSource src(derive_seed(seed, stream_stacks), lambda);
            FlatteningResult flat = flatten(n, 0, src, opts);
            StabResult r = stabilize(flat.omega, src, opts);
            return {std::move(r.final_config), flat.topplings + r.topplings};
        }
        case PhaseOneMethod::Sampled: {
            std::mt19937_64 extent_rng(derive_seed(seed, stream_extent));
            std::int64_t k = cached_sampler(static_cast<int>(n)).sample(extent_rng);
            StackSource src(derive_seed(seed, stream_phase2), lambda);
            StabResult r = stabilize(flat_interval(n, 0, k), src, opts);
            return {std::move(r.final_config), r.topplings};
        }
    }
    throw std::logic_error("settle_point_source: unknown method");
}

std::int64_t particles_in(const Configuration& cfg, Site lo, Site hi) {
    std::int64_t total = 0;
    auto it = cfg.sites().lower_bound(lo);
    for (; it != cfg.sites().end() && it->first <= hi; ++it)
        total += it->second == sleeping_state ? 1 : it->second;
    return total;
}

}  // namespace

double RunningStat::stderror() const {
    return count < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(count));
}

const char* to_string(PhaseOneMethod m) {
    switch (m) {
        case PhaseOneMethod::Direct: return "direct";
        case PhaseOneMethod::Physical: return "physical";
        case PhaseOneMethod::Sampled: return "sampled";
    }
    return "?";
}

PointSourceRecord point_source_run(std::int64_t n, std::uint64_t seed, double lambda,
                                   PhaseOneMethod method, std::uint64_t cap) {
    if (n < 1) throw std::invalid_argument("point_source_run: n must be >= 1");
    auto [final_cfg, topplings] = settle_point_source(n, seed, lambda, method, cap);

    // No sinks anywhere in a global run: exactly n sleepers, nothing else.
    if (final_cfg.sleeper_count() != n || final_cfg.mass() != n)
        throw std::logic_error("point_source_run: particle conservation violated");
    if (!final_cfg.is_stable())
        throw std::logic_error("point_source_run: final configuration not stable");

    PointSourceRecord rec;
    rec.n = n;
    rec.seed = seed;
    rec.lambda = lambda;
    rec.method = to_string(method);
    rec.min_site = final_cfg.min_site();
    rec.max_site = final_cfg.max_site();
    rec.span = rec.max_site - rec.min_site + 1;
    rec.density = static_cast<double>(n) / static_cast<double>(rec.span);
    rec.topplings = topplings;
    return rec;
}

DrivenDissipativeRecord driven_dissipative_run(std::int64_t m, std::uint64_t steps,
                                               std::uint64_t burn_in, std::uint64_t seed,
                                               double lambda, Placement placement,
                                               Site fixed_site, bool keep_series,
                                               std::uint64_t cap) {
    if (m < 0) throw std::invalid_argument("driven_dissipative_run: m must be >= 0");
    if (burn_in == 0) burn_in = steps / 5;
    if (steps <= burn_in)
        throw std::invalid_argument("driven_dissipative_run: steps must exceed burn-in");
    if (fixed_site < 0) fixed_site = m / 2;
    if (fixed_site > m)
        throw std::invalid_argument("driven_dissipative_run: fixed site outside [0, m]");

    StackSource src(derive_seed(seed, stream_stacks), lambda);
    std::mt19937_64 place_rng(derive_seed(seed, stream_placement));
    std::uniform_int_distribution<Site> pick(0, m);

    StabOptions opts;
    opts.cap = cap;
    StabilizationSession session({0, m}, src, opts);

    DrivenDissipativeRecord rec;
    rec.m = m;
    rec.steps = steps;
    rec.burn_in = burn_in;
    rec.seed = seed;
    rec.lambda = lambda;
    rec.placement = placement;
    rec.fixed_site = fixed_site;
    if (keep_series) rec.n_series.reserve(steps);

    RunningStat stat;         // N/(m+1) past burn-in
    RunningStat batch_stat;   // batch means, for an SE that respects autocorrelation
    double batch_acc = 0.0;
    std::uint64_t batch_fill = 0;
    const std::uint64_t kept = steps - burn_in;
    const std::uint64_t batch_len = std::max<std::uint64_t>(1, kept / 64);

    for (std::uint64_t t = 0; t < steps; ++t) {
        session.add_particle(placement == Placement::Uniform ? pick(place_rng) : fixed_site);
        session.stabilize_current();
        // stable on [0, m] means every particle in the volume sleeps
        std::int64_t n_m = session.mass_in_volume();
        if (n_m > m + 1 || !session.is_stable())
            throw std::logic_error("driven_dissipative_run: chain state invalid");
        if (keep_series) rec.n_series.push_back(n_m);
        if (t >= burn_in) {
            double frac = static_cast<double>(n_m) / static_cast<double>(m + 1);
            stat.push(frac);
            batch_acc += frac;
            if (++batch_fill == batch_len) {
                batch_stat.push(batch_acc / static_cast<double>(batch_len));
                batch_acc = 0.0;
                batch_fill = 0;
            }
        }
    }

    rec.rho_dd_hat = stat.mean;
    rec.se = batch_stat.count >= 2 ? batch_stat.stderror() : stat.stderror();
    rec.topplings = session.topplings_total();
    return rec;
}

BlockExperimentRecord block_experiment(std::int64_t n, Site i, double gamma,
                                       std::uint64_t seed, double lambda,
                                       PhaseOneMethod method, double eps,
                                       std::uint64_t cap) {
    if (n < 1) throw std::invalid_argument("block_experiment: n must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("block_experiment: gamma must be in (0,1)");
    if (!(eps > 0.0 && eps < 1.0))
        throw std::invalid_argument("block_experiment: eps must be in (0,1)");
    // Bulk condition: the block must sit well inside the flat interval.
    if (std::llabs(i) > static_cast<std::int64_t>((1.0 - eps) * static_cast<double>(n) / 2.0))
        throw std::invalid_argument("block_experiment: source offset i outside the bulk");
    if (method == PhaseOneMethod::Direct)
        throw std::invalid_argument("block_experiment: needs a two-phase method");

    auto half = static_cast<Site>(std::pow(static_cast<double>(n), gamma));
    BlockExperimentRecord rec;
    rec.n = n;
    rec.i = i;
    rec.gamma = gamma;
    rec.seed = seed;
    rec.lambda = lambda;
    rec.method = to_string(method);
    rec.block_lo = i - half;
    rec.block_hi = i;

    StabOptions opts;
    opts.cap = cap;

    // Phase 1. A physical flattening leaves `src` holding exactly the
    // cursor state Phase 2 starts from; the sampled flavor starts Phase 2
    // on fresh stacks, so its snapshot is the empty cursor map.
    std::uint64_t phase1_topplings = 0;
    Configuration omega;
    StackSource src(derive_seed(seed, method == PhaseOneMethod::Physical
                                          ? stream_stacks
                                          : stream_phase2),
                    lambda);
    if (method == PhaseOneMethod::Physical) {
        FlatteningResult flat = flatten(n, 0, src, opts);
        omega = std::move(flat.omega);
        phase1_topplings = flat.topplings;
    } else {
        std::mt19937_64 extent_rng(derive_seed(seed, stream_extent));
        omega = flat_interval(n, 0, cached_sampler(static_cast<int>(n)).sample(extent_rng));
    }

    // Phase 1 must have covered the block with one active particle per site
    // for the density statement; the flux identity below holds regardless.
    rec.bulk_ok = true;
    for (Site x = rec.block_lo; x <= rec.block_hi; ++x)
        if (omega.at(x) != 1) {
            rec.bulk_ok = false;
            break;
        }

    // Phase 2, block-first, with the boundary fluxes watched. The stack
    // state at the start of Phase 2 is the snapshot the replay returns to.
    CursorMap snapshot = src.snapshot_cursors();

    InstructionWatch watch;
    watch.track(rec.block_lo - 1);
    watch.track(rec.block_hi + 1);
    StabOptions phase2 = opts;
    phase2.policy = Policy::BlockFirst;
    phase2.block = Volume{rec.block_lo, rec.block_hi};
    phase2.watch = &watch;
    StabResult global = stabilize(omega, src, phase2);

    rec.a_star = watch.at(rec.block_lo - 1, Instruction::Right);
    rec.b_star = watch.at(rec.block_hi + 1, Instruction::Left);
    rec.d_global = particles_in(global.final_config, rec.block_lo, rec.block_hi);
    rec.topplings = phase1_topplings + global.topplings;

    // The global run is a complete point-source stabilization (same streams
    // and, by the abelian property, the same final configuration as any other
    // policy), so conservation must hold and the span comes for free.
    if (global.final_config.sleeper_count() != n || global.final_config.mass() != n)
        throw std::logic_error("block_experiment: particle conservation violated");
    rec.global_min_site = global.final_config.min_site();
    rec.global_max_site = global.final_config.max_site();
    rec.span = rec.global_max_site - rec.global_min_site + 1;

    // Finite-volume replay on the snapshot stacks.
    src.restore_cursors(snapshot);
    Configuration eta;
    for (Site x = rec.block_lo; x <= rec.block_hi; ++x) {
        std::int32_t v = omega.at(x);
        if (v != 0) eta.set(x, v);
    }
    for (std::uint64_t a = 0; a < rec.a_star; ++a) eta.add_particle(rec.block_lo);
    for (std::uint64_t b = 0; b < rec.b_star; ++b) eta.add_particle(rec.block_hi);
    StabResult replay = stabilize_in(eta, {rec.block_lo, rec.block_hi}, src, opts);

    rec.d_replayed = particles_in(replay.final_config, rec.block_lo, rec.block_hi);
    rec.topplings += replay.topplings;
    rec.identity_holds = rec.d_global == rec.d_replayed;
    return rec;
}

FlatnessProfile flatness_profile(std::int64_t n, Site win_lo, Site win_hi,
                                 std::uint64_t trials, std::uint64_t seed, double lambda,
                                 PhaseOneMethod method, std::uint64_t cap) {
    if (win_lo > win_hi) throw std::invalid_argument("flatness_profile: bad window");
    if (trials < 1) throw std::invalid_argument("flatness_profile: trials must be >= 1");

    FlatnessProfile prof;
    prof.n = n;
    prof.trials = trials;
    prof.seed = seed;
    prof.lambda = lambda;
    prof.win_lo = win_lo;
    prof.win_hi = win_hi;

    auto width = static_cast<std::size_t>(win_hi - win_lo + 1);
    std::vector<std::uint64_t> hits(width, 0);

    for (std::uint64_t t = 0; t < trials; ++t) {
        std::uint64_t replica_seed = derive_seed(seed, t);
        auto [final_cfg, topplings] =
            settle_point_source(n, replica_seed, lambda, method, cap);
        (void)topplings;
        if (final_cfg.sleeper_count() != n)
            throw std::logic_error("flatness_profile: particle conservation violated");
        auto it = final_cfg.sites().lower_bound(win_lo);
        for (; it != final_cfg.sites().end() && it->first <= win_hi; ++it)
            if (it->second == sleeping_state)
                ++hits[static_cast<std::size_t>(it->first - win_lo)];
    }

    prof.p_hat.resize(width);
    prof.se.resize(width);
    double mean = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
        double p = static_cast<double>(hits[j]) / static_cast<double>(trials);
        prof.p_hat[j] = p;
        prof.se[j] = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
        prof.window_sleepers += hits[j];
        mean += p;
    }
    prof.window_mean = mean / static_cast<double>(width);
    for (std::size_t j = 0; j + 1 < width; ++j)
        prof.max_adjacent_diff =
            std::max(prof.max_adjacent_diff, std::abs(prof.p_hat[j + 1] - prof.p_hat[j]));
    return prof;
}

}  // namespace arw
