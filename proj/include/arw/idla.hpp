// Flattening phase and coupled clusters.
//
// Flattening topples the leftmost site holding >= 2 particles until every
// site holds at most one; sleep instructions land on multiplicity >= 2 and
// are void. The result is an interval of n sites, one active particle each,
// determined entirely by K, the number of occupied sites strictly right of
// the source. K is distributed like the descent count of a uniform random
// permutation, which is why the eulerian module supplies the couplings.

#pragma once

#include <cstdint>
#include <random>

#include "arw/config.hpp"
#include "arw/engine.hpp"
#include "arw/eulerian.hpp"

namespace arw {

struct FlatteningResult {
    Configuration omega;     // the interval, one active particle per site
    Site left = 0;
    Site right = 0;
    std::int64_t K = 0;      // occupied sites strictly right of the source
    Odometer odometer;
    std::uint64_t topplings = 0;
};

// Flatten n particles released at s. Policy in opts applies to the >= 2
// threshold (any order gives the same result; leftmost is the default).
FlatteningResult flatten(std::int64_t n, Site s, StackSource& src,
                         const StabOptions& opts = {});

// The interval the flattening of n particles at source s produces when K
// sites end up strictly right of s, as a configuration of active particles.
Configuration flat_interval(std::int64_t n, Site s, std::int64_t K);

struct ClusterCouplingOutcome {
    std::int64_t K0 = 0;  // cluster extent for source 0, law P_n
    std::int64_t K1 = 0;  // cluster extent for source 1, law P_n
    bool coincide = false;  // K0 = K1 + 1, i.e. identical clusters
};

// One draw from the maximal coupling of the two extents.
ClusterCouplingOutcome couple_clusters(const ShiftCoupler& coupler,
                                       std::mt19937_64& rng);
ClusterCouplingOutcome couple_clusters(int n, std::uint64_t seed);

struct CoupledPairResult {
    ClusterCouplingOutcome extents;
    Configuration final0;  // stabilized point source at 0
    Configuration final1;  // stabilized point source at 1
};

// Two complete point-source runs (sources 0 and 1) whose flattening extents
// come from the maximal coupling. On coincidence both runs stabilize the
// shared interval on identically seeded fresh stacks, so the finals agree
// site for site; otherwise the runs are independent.
CoupledPairResult coupled_point_source_pair(const ShiftCoupler& coupler,
                                            std::mt19937_64& rng, double lambda,
                                            const StabOptions& opts = {});
CoupledPairResult coupled_point_source_pair(int n, std::uint64_t seed,
                                            double lambda,
                                            const StabOptions& opts = {});

}  // namespace arw
