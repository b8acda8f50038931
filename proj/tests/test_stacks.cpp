#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "arw/stacks.hpp"

using namespace arw;

TEST_CASE("marginal probabilities from lambda") {
    StackSource s(7, 1.0);
    CHECK(s.p_left() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(s.p_leftright() == 2.0 * s.p_left());  // bit-exact doubling
    CHECK(s.p_sleep() == doctest::Approx(0.5).epsilon(1e-15));

    StackSource t(7, 3.0);
    CHECK(t.p_left() == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(t.p_sleep() == doctest::Approx(0.75).epsilon(1e-15));

    CHECK_THROWS_AS(StackSource(1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(StackSource(1, -2.0), std::invalid_argument);
    CHECK_THROWS_AS(StackSource(1, std::numeric_limits<double>::infinity()),
                    std::invalid_argument);
    CHECK_THROWS_AS(StackSource(1, std::nan("")), std::invalid_argument);
}

TEST_CASE("stack entries are pure functions of (seed, x, k)") {
    StackSource a(42, 1.0);
    StackSource b(42, 1.0);
    for (Site x : {Site(-100), Site(0), Site(3), Site(1'000'000)}) {
        for (std::uint64_t k = 1; k <= 200; ++k) {
            Instruction i = a.instruction(x, k);
            CHECK(i == b.instruction(x, k));
            CHECK(i == a.instruction(x, k));  // re-reading never perturbs
        }
    }
    CHECK(a.cursor(0) == 1);  // pure lookups leave cursors alone

    // Different seeds must give different streams somewhere early.
    StackSource c(43, 1.0);
    bool differs = false;
    for (std::uint64_t k = 1; k <= 64 && !differs; ++k)
        differs = a.instruction(0, k) != c.instruction(0, k);
    CHECK(differs);

    CHECK_THROWS_AS(a.instruction(0, 0), std::invalid_argument);
}

TEST_CASE("cursor consumption and write-back") {
    StackSource s(9, 0.5);
    CHECK(s.cursor(5) == 1);
    std::vector<Instruction> seen;
    for (int j = 0; j < 10; ++j) seen.push_back(s.next_instruction(5));
    CHECK(s.cursor(5) == 11);
    for (int j = 0; j < 10; ++j)
        CHECK(seen[static_cast<std::size_t>(j)] ==
              s.instruction(5, static_cast<std::uint64_t>(j) + 1));

    s.set_cursor(5, 4);
    CHECK(s.cursor(5) == 4);
    CHECK(s.next_instruction(5) == s.instruction(5, 4));

    s.set_cursor(5, 1);  // back to fresh: the entry disappears
    CHECK(s.cursor(5) == 1);
    CHECK(s.snapshot_cursors().empty());
    CHECK_THROWS_AS(s.set_cursor(5, 0), std::invalid_argument);
}

TEST_CASE("snapshot and restore replay the stream exactly") {
    StackSource s(1234, 2.0);
    for (int j = 0; j < 7; ++j) s.next_instruction(-3);
    for (int j = 0; j < 2; ++j) s.next_instruction(8);

    CursorMap snap = s.snapshot_cursors();
    CHECK(snap.at(-3) == 8);
    CHECK(snap.at(8) == 3);

    std::vector<Instruction> first;
    for (int j = 0; j < 20; ++j) first.push_back(s.next_instruction(-3));

    s.restore_cursors(snap);
    for (int j = 0; j < 20; ++j)
        CHECK(first[static_cast<std::size_t>(j)] == s.next_instruction(-3));

    // Restoring also resets sites touched only after the snapshot.
    s.next_instruction(99);
    s.restore_cursors(snap);
    CHECK(s.cursor(99) == 1);

    CursorMap bad = snap;
    bad[0] = 0;
    CHECK_THROWS_AS(s.restore_cursors(bad), std::invalid_argument);
}

namespace {

// Instruction frequencies over sites x in [0, sites) and entries
// k in [1, per_site].
std::array<std::uint64_t, 3> tally(const StackSource& s, Site sites, std::uint64_t per_site) {
    std::array<std::uint64_t, 3> counts{};
    for (Site x = 0; x < sites; ++x)
        for (std::uint64_t k = 1; k <= per_site; ++k)
            ++counts[static_cast<std::size_t>(s.instruction(x, k))];
    return counts;
}

}  // namespace

TEST_CASE("empirical marginals match the lambda law") {
    // One million draws; all frequencies within 3 binomial standard errors.
    StackSource s(2024, 1.0);
    auto counts = tally(s, 1000, 1000);
    double total = 1e6;
    double expected[3] = {0.25, 0.25, 0.5};
    for (int t = 0; t < 3; ++t) {
        double p = expected[t];
        double se = std::sqrt(p * (1 - p) / total);
        CHECK(std::abs(static_cast<double>(counts[static_cast<std::size_t>(t)]) / total - p) <
              3 * se);
    }
}

TEST_CASE("chi-square goodness of fit across lambda") {
    // df = 2; critical value at alpha = 0.01 is 9.21034.
    for (double lambda : {0.25, 1.0, 4.0}) {
        StackSource s(77, lambda);
        auto counts = tally(s, 400, 500);
        double total = 2e5;
        double expected[3] = {s.p_left() * total, s.p_left() * total, s.p_sleep() * total};
        double chi2 = 0;
        for (int t = 0; t < 3; ++t) {
            double d = static_cast<double>(counts[static_cast<std::size_t>(t)]) - expected[t];
            chi2 += d * d / expected[t];
        }
        INFO("lambda = ", lambda, ", chi2 = ", chi2);
        CHECK(chi2 < 9.21034);
    }
}

TEST_CASE("neighboring entries are uncorrelated") {
    // Pearson correlation of the Left indicator across (x,k)->(x,k+1) and
    // (x,k)->(x+1,k); for independent draws |r| < 3/sqrt(N) a.s.-ish.
    StackSource s(5150, 1.0);
    const std::uint64_t N = 100'000;
    auto corr = [&](auto pair_of) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::uint64_t j = 0; j < N; ++j) {
            auto [a, b] = pair_of(j);
            double x = a == Instruction::Left, y = b == Instruction::Left;
            sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
        }
        double n = static_cast<double>(N);
        double cov = sxy / n - (sx / n) * (sy / n);
        double vx = sxx / n - (sx / n) * (sx / n);
        double vy = syy / n - (sy / n) * (sy / n);
        return cov / std::sqrt(vx * vy);
    };
    double r_depth = corr([&](std::uint64_t j) {
        return std::pair(s.instruction(0, j + 1), s.instruction(0, j + 2));
    });
    double r_space = corr([&](std::uint64_t j) {
        return std::pair(s.instruction(static_cast<Site>(j), 1),
                         s.instruction(static_cast<Site>(j) + 1, 1));
    });
    double bound = 3.0 / std::sqrt(static_cast<double>(N));
    CHECK(std::abs(r_depth) < bound);
    CHECK(std::abs(r_space) < bound);
}

TEST_CASE("instruction names") {
    CHECK(std::string(to_string(Instruction::Left)) == "left");
    CHECK(std::string(to_string(Instruction::Right)) == "right");
    CHECK(std::string(to_string(Instruction::Sleep)) == "sleep");
}
