#include "arw/stacks.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace arw {

const char* to_string(Instruction ins) noexcept {
    switch (ins) {
        case Instruction::Left: return "left";
        case Instruction::Right: return "right";
        case Instruction::Sleep: return "sleep";
    }
    return "?";
}

StackSource::StackSource(std::uint64_t seed, double lambda) : seed_(seed), lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("StackSource: sleep rate lambda must be positive and finite");
    }
    p_left_ = 0.5 / (1.0 + lambda);
    // Exact doubling, so P(Right) = P(Left) holds bit-for-bit.
    p_leftright_ = 2.0 * p_left_;
}

std::uint64_t StackSource::cursor(Site x) const {
    auto it = cursors_.find(x);
    return it == cursors_.end() ? 1 : it->second;
}

Instruction StackSource::next_instruction(Site x) {
    auto [it, inserted] = cursors_.try_emplace(x, 1);
    Instruction ins = instruction(x, it->second);
    ++it->second;
    return ins;
}

void StackSource::restore_cursors(const CursorMap& snapshot) {
    for (const auto& [x, k] : snapshot) {
        if (k < 1) {
            throw std::invalid_argument("StackSource::restore_cursors: cursor below 1 at site " +
                                        std::to_string(x));
        }
    }
    cursors_ = snapshot;
}

void StackSource::set_cursor(Site x, std::uint64_t v) {
    if (v < 1) {
        throw std::invalid_argument("StackSource::set_cursor: cursor below 1");
    }
    if (v == 1) {
        cursors_.erase(x);
    } else {
        cursors_[x] = v;
    }
}

}  // namespace arw
