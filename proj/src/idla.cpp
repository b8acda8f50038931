#include "arw/idla.hpp"

#include <stdexcept>
#include <string>

namespace arw {

namespace {

// Streams for the RNGs a coupled pair consumes.
enum : std::uint64_t { stream_shared = 1, stream_left = 2, stream_right = 3 };

}  // namespace

FlatteningResult flatten(std::int64_t n, Site s, StackSource& src,
                         const StabOptions& opts) {
    if (n < 1) throw std::invalid_argument("flatten: n must be >= 1");
    StabResult r = run_flattening(Configuration::point_source(s, n), src, opts);

    FlatteningResult out;
    out.omega = std::move(r.final_config);
    out.odometer = std::move(r.odometer);
    out.topplings = r.topplings;
    out.left = out.omega.min_site();
    out.right = out.omega.max_site();
    out.K = out.right - s;

    // The result must be an interval of n sites, one active particle each.
    if (out.right - out.left + 1 != n || out.omega.support_size() != static_cast<std::size_t>(n))
        throw std::logic_error("flatten: result is not an interval of n sites");
    for (const auto& [x, v] : out.omega.sites())
        if (v != 1) throw std::logic_error("flatten: site " + std::to_string(x) +
                                           " does not hold exactly one active particle");
    if (out.K < 0 || out.K > n - 1)
        throw std::logic_error("flatten: extent K out of range");
    return out;
}

Configuration flat_interval(std::int64_t n, Site s, std::int64_t K) {
    if (n < 1) throw std::invalid_argument("flat_interval: n must be >= 1");
    if (K < 0 || K > n - 1) throw std::invalid_argument("flat_interval: K out of range");
    Configuration c;
    for (Site x = s + K - n + 1; x <= s + K; ++x) c.set(x, 1);
    return c;
}

ClusterCouplingOutcome couple_clusters(const ShiftCoupler& coupler,
                                       std::mt19937_64& rng) {
    ShiftCoupler::Draw d = coupler.sample(rng);
    return {d.k0, d.k1, d.coincide};
}

ClusterCouplingOutcome couple_clusters(int n, std::uint64_t seed) {
    ShiftCoupler coupler(n);
    std::mt19937_64 rng(seed);
    return couple_clusters(coupler, rng);
}

CoupledPairResult coupled_point_source_pair(const ShiftCoupler& coupler,
                                            std::mt19937_64& rng, double lambda,
                                            const StabOptions& opts) {
    std::int64_t n = coupler.n();
    CoupledPairResult out;
    out.extents = couple_clusters(coupler, rng);
    const auto& e = out.extents;

    if (e.coincide) {
        // Identical flat intervals; both runs consume the same fresh stacks,
        // run independently as an honest bit-identity check.
        Configuration shared = flat_interval(n, 0, e.K0);
        std::uint64_t s = derive_seed(rng(), stream_shared);
        StackSource src0(s, lambda);
        StackSource src1(s, lambda);
        out.final0 = stabilize(shared, src0, opts).final_config;
        out.final1 = stabilize(shared, src1, opts).final_config;
    } else {
        StackSource src0(derive_seed(rng(), stream_left), lambda);
        StackSource src1(derive_seed(rng(), stream_right), lambda);
        out.final0 = stabilize(flat_interval(n, 0, e.K0), src0, opts).final_config;
        out.final1 = stabilize(flat_interval(n, 1, e.K1), src1, opts).final_config;
    }
    return out;
}

CoupledPairResult coupled_point_source_pair(int n, std::uint64_t seed, double lambda,
                                            const StabOptions& opts) {
    ShiftCoupler coupler(n);
    std::mt19937_64 rng(seed);
    return coupled_point_source_pair(coupler, rng, lambda, opts);
}

}  // namespace arw
