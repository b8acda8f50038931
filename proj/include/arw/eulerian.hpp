// Eulerian distributions P_n(k) = <n,k>/n! of permutation descent counts.
//
// Exact mode keeps big-integer numerators over the shared denominator n!,
// so normalization, symmetry and the TV-equals-mode identity can be checked
// with zero tolerance. Beyond n_exact the distribution is carried in log
// space through the same recurrence.
//
// Also here: the normal approximation N((n-1)/2, (n+1)/12), the sup-CDF gap
// diagnostic, exact samplers, and the maximal coupling of P_n with its unit
// right shift (success probability exactly 1 - TV).

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace arw {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

// Representation threshold: exact big-rational masses up to here, log-space
// reals beyond.
inline constexpr int eulerian_exact_limit = 200;

// <n,k> via the recurrence <n,k> = (k+1)<n-1,k> + (n-k)<n-1,k-1>.
// Rows are cached; safe for concurrent readers.
const std::vector<BigInt>& eulerian_row(int n);
BigInt eulerian_number(int n, std::int64_t k);  // 0 for k outside [0, n-1]
BigInt factorial(int n);

// Number of positions i with perm(i) > perm(i+1); perm must be a bijection
// on {1..n} (1-based values).
int descent_count(const std::vector<int>& perm);

class EulerianDist {
public:
    static EulerianDist exact(int n);
    static EulerianDist log_space(int n);
    // Exact up to eulerian_exact_limit, log space beyond.
    static EulerianDist for_n(int n);

    int n() const noexcept { return n_; }
    bool exact_mode() const noexcept { return exact_; }
    int mode_index() const noexcept { return mode_index_; }

    double mass(std::int64_t k) const;          // P_n(k), 0 off support
    double log_mass(std::int64_t k) const;      // -inf off support
    BigRat mass_exact(std::int64_t k) const;    // exact mode only

    const std::vector<BigRat>& masses_exact() const { return masses_; }
    const std::vector<double>& log_masses() const { return log_masses_; }

    bool is_unimodal() const;

private:
    EulerianDist() = default;
    int n_ = 0;
    bool exact_ = false;
    std::vector<BigRat> masses_;      // exact mode, k = 0..n-1
    std::vector<double> log_masses_;  // log mode, k = 0..n-1
    int mode_index_ = 0;              // smallest argmax
};

// TV(P_n, Q_n) with Q_n(k) = P_n(k-1). Computed two ways -- the mode value
// max_k P_n(k) and the direct half-sum of |P_n(k) - P_n(k-1)| -- and the two
// must agree (exactly in rational mode, within 1e-12 in log mode).
struct TvShiftResult {
    bool exact_mode = false;
    BigRat exact_value;  // valid in exact mode
    double value = 0.0;
};
TvShiftResult tv_shift(const EulerianDist& dist);

struct ModeBoundRow {
    int n;
    double max_mass;         // max_k P_n(k)
    double sqrt_n_scaled;    // sqrt(n) * max_k P_n(k)
};
std::vector<ModeBoundRow> mode_bound_table(const std::vector<int>& n_list);

// Normal law with the descent-statistic moments mu = (n-1)/2,
// sigma^2 = (n+1)/12.
struct NormalApprox {
    double mu = 0.0;
    double sigma_sq = 0.0;
    static NormalApprox for_n(int n);
    double cdf(double x) const;
};

// sup_x |F_n(x) - Phi_n(x)| evaluated at the lattice atoms (both one-sided
// limits), F_n the Eulerian CDF.
double normal_cdf_gap(int n);

// Uniform big integer in [0, bound) by top-chunk rejection.
BigInt uniform_below(const BigInt& bound, std::mt19937_64& rng);

// Exact inverse-CDF sampler for P_n.
class EulerianSampler {
public:
    explicit EulerianSampler(int n);
    int n() const noexcept { return n_; }
    int sample(std::mt19937_64& rng) const;

private:
    int n_;
    std::vector<BigInt> cumulative_;  // partial sums of <n,k>
    BigInt total_;                    // n!
};

// Maximal coupling of X ~ P_n and Y ~ P_n such that X = Y + 1 with
// probability exactly 1 - TV(P_n, Q_n). Exact integer arithmetic over the
// common denominator n!.
class ShiftCoupler {
public:
    explicit ShiftCoupler(int n);

    int n() const noexcept { return n_; }
    BigRat tv_exact() const;
    double tv() const;

    struct Draw {
        std::int64_t k0;   // ~ P_n
        std::int64_t k1;   // ~ P_n
        bool coincide;     // k0 == k1 + 1
    };
    Draw sample(std::mt19937_64& rng) const;

private:
    int n_;
    BigInt total_;           // n!
    BigInt overlap_total_;   // sum_k min(P, Q) numerators
    std::vector<BigInt> overlap_cum_;  // k = 0..n
    std::vector<BigInt> resid_p_cum_;  // P - min(P,Q), k = 0..n
    std::vector<BigInt> resid_q_cum_;  // Q - min(P,Q), k = 0..n
};

}  // namespace arw
