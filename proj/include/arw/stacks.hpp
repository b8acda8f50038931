// Deterministic, replayable instruction stacks.
//
// Every lattice site x carries an infinite stack of instructions
// Instr_x(1), Instr_x(2), ... with i.i.d. marginals
//
//     Left   w.p. 1/(2(1+lambda))
//     Right  w.p. 1/(2(1+lambda))
//     Sleep  w.p. lambda/(1+lambda)
//
// Stacks are never stored: entry (x,k) is a pure function of
// (seed, lambda, x, k), derived by a counter-based mixing chain, so stacks
// are random-access and replayable. A cursor map tracks the next unused
// index per site; snapshot/restore of cursors replays instruction streams
// bit-exactly.
//
// The (seed -> stack) mapping is versioned (stack_scheme_version); any
// change to the mixing chain or the threshold rule is a scheme bump.

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>

namespace arw {

using Site = std::int64_t;

enum class Instruction : std::uint8_t { Left = 0, Right = 1, Sleep = 2 };

inline constexpr int stack_scheme_version = 1;

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer: bijective, full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Child seed for stream `stream` of a master seed; replicas and auxiliary
// RNGs each get their own stream so they never share randomness.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return mix64(mix64(master + golden_gamma) ^ (stream + golden_gamma));
}

// Stream base of site x: the multiply spreads neighboring sites across the
// word before the finalizer decorrelates them.
constexpr std::uint64_t site_base(std::uint64_t seed, Site x) noexcept {
    return mix64(seed ^ (static_cast<std::uint64_t>(x) * 0xd1342543de82ef95ULL + golden_gamma));
}

// Entry k >= 1 of the stream with the given base: output k of splitmix64
// seeded at the base. One finalizer per entry; engines that walk a stack
// sequentially keep base + k * golden_gamma as a running phase and pay a
// single mix64 per instruction.
constexpr std::uint64_t stack_word_at(std::uint64_t base, std::uint64_t k) noexcept {
    return mix64(base + k * golden_gamma);
}

// One uniform 64-bit word per stack entry (seed, x, k). Scheme v1.
constexpr std::uint64_t stack_word(std::uint64_t seed, Site x, std::uint64_t k) noexcept {
    return stack_word_at(site_base(seed, x), k);
}

// Uniform double in [0,1) with 53 random bits.
constexpr double unit_double(std::uint64_t w) noexcept {
    return static_cast<double>(w >> 11) * 0x1.0p-53;
}

// Threshold rule: u < p_left -> Left, u < p_leftright -> Right, else Sleep.
constexpr Instruction classify_instruction(double u, double p_left, double p_leftright) noexcept {
    if (u < p_left) return Instruction::Left;
    if (u < p_leftright) return Instruction::Right;
    return Instruction::Sleep;
}

const char* to_string(Instruction ins) noexcept;

// Ordered so snapshots serialize deterministically. Sites absent from the
// map are at cursor 1 (nothing consumed).
using CursorMap = std::map<Site, std::uint64_t>;

class StackSource {
public:
    StackSource(std::uint64_t seed, double lambda);

    std::uint64_t seed() const noexcept { return seed_; }
    double lambda() const noexcept { return lambda_; }

    double p_left() const noexcept { return p_left_; }
    double p_leftright() const noexcept { return p_leftright_; }
    double p_sleep() const noexcept { return 1.0 - p_leftright_; }

    // Pure lookup of stack entry k >= 1 at site x; does not touch cursors.
    // Inline: this is the innermost call of every toppling.
    Instruction instruction(Site x, std::uint64_t k) const {
        if (k < 1)
            throw std::invalid_argument("StackSource::instruction: stack index k must be >= 1");
        return classify_instruction(unit_double(stack_word(seed_, x, k)), p_left_, p_leftright_);
    }

    // Next unused stack index at x (>= 1).
    std::uint64_t cursor(Site x) const;

    // Consumes and returns instruction(x, cursor(x)).
    Instruction next_instruction(Site x);

    CursorMap snapshot_cursors() const { return cursors_; }

    // Replaces the whole cursor state; subsequent consumption replays the
    // post-snapshot stream exactly. Cursors below 1 are rejected.
    void restore_cursors(const CursorMap& snapshot);

    // Bulk cursor write-back used by the stabilization engine (v >= 1).
    void set_cursor(Site x, std::uint64_t v);

private:
    std::uint64_t seed_;
    double lambda_;
    double p_left_;
    double p_leftright_;
    CursorMap cursors_;
};

}  // namespace arw
