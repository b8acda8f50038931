// Toppling engine: legal single topplings, global stabilization, and
// finite-volume stabilization with sinks.
//
// One toppling at an unstable site consumes the next instruction there:
// Left/Right move one particle (arriving on a sleeper wakes it, s + 1 = 2),
// Sleep converts a lone active particle to sleeping and is a consumed no-op
// at multiplicity >= 2. The final configuration and odometer do not depend
// on the toppling order, which is what the alternative policies are for.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>

#include "arw/config.hpp"
#include "arw/stacks.hpp"

namespace arw {

// Closed interval of sites allowed to topple; everything outside absorbs.
struct Volume {
    Site lo = 0;
    Site hi = 0;
};

enum class Policy : std::uint8_t {
    Leftmost,     // default: leftmost unstable site
    Rightmost,    // abelian-property exercise
    RandomLegal,  // uniform over unstable sites, abelian-property exercise
    BlockFirst,   // leftmost unstable in `block` if any, else leftmost overall
};

// Per-site tally of instructions consumed during a run. Only sites
// registered with track() beforehand are counted.
struct InstructionWatch {
    std::map<Site, std::array<std::uint64_t, 3>> counts;
    void track(Site x) { counts.emplace(x, std::array<std::uint64_t, 3>{}); }
    std::uint64_t at(Site x, Instruction t) const;
};

struct StabOptions {
    Policy policy = Policy::Leftmost;
    std::uint64_t cap = 1'000'000'000;  // safety valve, not a tuning knob
    std::uint64_t policy_seed = 0;      // RandomLegal only
    std::optional<Volume> block;        // BlockFirst only
    InstructionWatch* watch = nullptr;  // optional, owned by caller
};

struct StabResult {
    Configuration final_config;
    Odometer odometer;
    std::uint64_t topplings = 0;
    std::uint64_t absorbed_left = 0;   // particles deleted past vol.lo
    std::uint64_t absorbed_right = 0;  // particles deleted past vol.hi
};

class CapExceededError : public std::runtime_error {
public:
    explicit CapExceededError(std::uint64_t cap);
    std::uint64_t cap;
};

class IllegalToppleError : public std::logic_error {
public:
    explicit IllegalToppleError(Site x);
};

// Reference single step: execute the next instruction at x, which must be
// unstable. Global semantics (no sinks).
void topple(Configuration& cfg, Odometer& odo, StackSource& src, Site x);

// Topple until stable on all of Z. Mass is conserved; terminates a.s. for
// finite mass. On CapExceededError the StackSource cursors are left exactly
// as they were (the run is discarded wholesale).
StabResult stabilize(const Configuration& cfg, StackSource& src,
                     const StabOptions& opts = {});

// Topple until stable on vol; particles stepping outside are deleted and
// counted per side. Sites outside vol never topple.
StabResult stabilize_in(const Configuration& cfg, Volume vol, StackSource& src,
                        const StabOptions& opts = {});

// The addition operator: stabilize_in(cfg + delta_x) for x in vol. cfg is
// expected stable on vol.
StabResult add_and_stabilize(const Configuration& cfg, Volume vol,
                             StackSource& src, Site x,
                             const StabOptions& opts = {});

// Flattening run: topple (leftmost by default) while some site holds >= 2
// particles, stopping at |value| <= 1 everywhere. With a sleeper-free start
// every Sleep lands on multiplicity >= 2 and is void, so the result carries
// active particles only. cfg must contain no sleepers.
StabResult run_flattening(const Configuration& cfg, StackSource& src,
                          const StabOptions& opts = {});

// Persistent finite-volume system for driven chains: keeps the lattice and
// cursor cache alive across many add/stabilize rounds instead of rebuilding
// them each step. Cursor state is pushed back to the StackSource by
// sync_cursors() and the destructor.
class StabilizationSession {
public:
    StabilizationSession(Volume vol, StackSource& src, StabOptions opts = {});
    ~StabilizationSession();

    StabilizationSession(const StabilizationSession&) = delete;
    StabilizationSession& operator=(const StabilizationSession&) = delete;

    void add_particle(Site x);             // x must lie in the volume
    std::uint64_t stabilize_current();     // topplings performed this call
    bool is_stable() const;

    std::int64_t sleeper_count() const;
    std::int64_t mass_in_volume() const;
    Configuration config() const;

    std::uint64_t topplings_total() const;
    std::uint64_t absorbed_left() const;
    std::uint64_t absorbed_right() const;

    void sync_cursors();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace arw
