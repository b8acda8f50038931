#include "arw/eulerian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

namespace arw {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
    if (a == neg_inf) return b;
    if (b == neg_inf) return a;
    double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

// Only rows actually requested are kept; intermediate rows of the
// recurrence live in a rolling buffer. Keeping every row up to n would cost
// Theta(n^3 log n) bits.
std::mutex row_mutex;
std::map<int, std::vector<BigInt>> row_cache;  // guarded by row_mutex

std::mutex fact_mutex;
std::vector<BigInt> fact_cache;  // fact_cache[i] = i!, guarded by fact_mutex

void require_positive_n(int n, const char* where) {
    if (n < 1)
        throw std::invalid_argument(std::string(where) + ": n must be >= 1, got " +
                                    std::to_string(n));
}

// Normalized log-space row: log P_n(k), k = 0..n-1.
std::vector<double> log_row(int n) {
    std::vector<double> row{0.0};  // n = 1
    for (int m = 2; m <= n; ++m) {
        std::vector<double> next(m);
        double log_m = std::log(static_cast<double>(m));
        for (int k = 0; k < m; ++k) {
            double up = k < m - 1 ? std::log(static_cast<double>(k + 1)) + row[k] : neg_inf;
            double diag = k >= 1 ? std::log(static_cast<double>(m - k)) + row[k - 1] : neg_inf;
            next[k] = log_add_exp(up, diag) - log_m;
        }
        row = std::move(next);
    }
    return row;
}

}  // namespace

const std::vector<BigInt>& eulerian_row(int n) {
    require_positive_n(n, "eulerian_row");
    std::lock_guard<std::mutex> lock(row_mutex);
    auto it = row_cache.find(n);
    if (it != row_cache.end()) return it->second;
    std::vector<BigInt> row{BigInt(1)};  // n = 1
    for (int m = 2; m <= n; ++m) {
        std::vector<BigInt> next(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) {
            BigInt v = 0;
            if (k < m - 1) v += BigInt(k + 1) * row[static_cast<std::size_t>(k)];
            if (k >= 1) v += BigInt(m - k) * row[static_cast<std::size_t>(k - 1)];
            next[static_cast<std::size_t>(k)] = std::move(v);
        }
        row = std::move(next);
    }
    return row_cache.emplace(n, std::move(row)).first->second;
}

BigInt eulerian_number(int n, std::int64_t k) {
    require_positive_n(n, "eulerian_number");
    if (k < 0 || k >= n) return 0;
    return eulerian_row(n)[static_cast<std::size_t>(k)];
}

BigInt factorial(int n) {
    if (n < 0) throw std::invalid_argument("factorial: n must be >= 0");
    std::lock_guard<std::mutex> lock(fact_mutex);
    if (fact_cache.empty()) fact_cache.push_back(1);
    while (static_cast<int>(fact_cache.size()) <= n)
        fact_cache.push_back(fact_cache.back() * BigInt(fact_cache.size()));
    return fact_cache[static_cast<std::size_t>(n)];
}

int descent_count(const std::vector<int>& perm) {
    int n = static_cast<int>(perm.size());
    if (n < 1) throw std::invalid_argument("descent_count: empty permutation");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int v : perm) {
        if (v < 1 || v > n || seen[static_cast<std::size_t>(v - 1)])
            throw std::invalid_argument("descent_count: not a permutation of 1..n");
        seen[static_cast<std::size_t>(v - 1)] = 1;
    }
    int d = 0;
    for (int i = 0; i + 1 < n; ++i)
        if (perm[static_cast<std::size_t>(i)] > perm[static_cast<std::size_t>(i + 1)]) ++d;
    return d;
}

EulerianDist EulerianDist::exact(int n) {
    require_positive_n(n, "EulerianDist::exact");
    EulerianDist d;
    d.n_ = n;
    d.exact_ = true;
    const auto& row = eulerian_row(n);
    BigInt total = factorial(n);
    d.masses_.reserve(row.size());
    BigInt check = 0;
    for (const auto& v : row) {
        d.masses_.emplace_back(v, total);
        check += v;
    }
    if (check != total) throw std::logic_error("EulerianDist: row does not sum to n!");
    d.mode_index_ = static_cast<int>(
        std::max_element(row.begin(), row.end()) - row.begin());
    return d;
}

EulerianDist EulerianDist::log_space(int n) {
    require_positive_n(n, "EulerianDist::log_space");
    EulerianDist d;
    d.n_ = n;
    d.exact_ = false;
    d.log_masses_ = log_row(n);
    // Compensated normalization check; the recurrence divides by m each
    // step so drift should stay far below this.
    double sum = 0.0, c = 0.0;
    for (double lm : d.log_masses_) {
        double y = std::exp(lm) - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::logic_error("EulerianDist: log-space masses drifted from 1");
    d.mode_index_ = static_cast<int>(
        std::max_element(d.log_masses_.begin(), d.log_masses_.end()) -
        d.log_masses_.begin());
    return d;
}

EulerianDist EulerianDist::for_n(int n) {
    return n <= eulerian_exact_limit ? exact(n) : log_space(n);
}

double EulerianDist::mass(std::int64_t k) const {
    if (k < 0 || k >= n_) return 0.0;
    if (exact_) return masses_[static_cast<std::size_t>(k)].convert_to<double>();
    return std::exp(log_masses_[static_cast<std::size_t>(k)]);
}

double EulerianDist::log_mass(std::int64_t k) const {
    if (k < 0 || k >= n_) return neg_inf;
    if (exact_)
        return std::log(masses_[static_cast<std::size_t>(k)].convert_to<double>());
    return log_masses_[static_cast<std::size_t>(k)];
}

BigRat EulerianDist::mass_exact(std::int64_t k) const {
    if (!exact_) throw std::logic_error("mass_exact: distribution is in log mode");
    if (k < 0 || k >= n_) return BigRat(0);
    return masses_[static_cast<std::size_t>(k)];
}

bool EulerianDist::is_unimodal() const {
    auto leq = [&](int a, int b) {
        if (exact_)
            return masses_[static_cast<std::size_t>(a)] <= masses_[static_cast<std::size_t>(b)];
        return log_masses_[static_cast<std::size_t>(a)] <= log_masses_[static_cast<std::size_t>(b)];
    };
    for (int k = 0; k + 1 < n_; ++k) {
        if (k + 1 <= mode_index_) {
            if (!leq(k, k + 1)) return false;
        } else {
            if (!leq(k + 1, k)) return false;
        }
    }
    return true;
}

TvShiftResult tv_shift(const EulerianDist& dist) {
    if (!dist.is_unimodal())
        throw std::logic_error("tv_shift: distribution is not unimodal");
    TvShiftResult r;
    r.exact_mode = dist.exact_mode();
    int n = dist.n();
    if (dist.exact_mode()) {
        BigRat mode_mass = dist.mass_exact(dist.mode_index());
        BigRat half_sum = 0;
        for (int k = 0; k <= n; ++k) {
            BigRat diff = dist.mass_exact(k) - dist.mass_exact(k - 1);
            if (diff < 0) diff = -diff;
            half_sum += diff;
        }
        half_sum /= 2;
        if (half_sum != mode_mass)
            throw std::logic_error("tv_shift: half-sum disagrees with mode mass");
        r.exact_value = mode_mass;
        r.value = mode_mass.convert_to<double>();
    } else {
        double mode_mass = dist.mass(dist.mode_index());
        double half_sum = 0.0;
        for (int k = 0; k <= n; ++k)
            half_sum += std::abs(dist.mass(k) - dist.mass(k - 1));
        half_sum /= 2.0;
        if (std::abs(half_sum - mode_mass) > 1e-12)
            throw std::logic_error("tv_shift: half-sum disagrees with mode mass");
        r.value = mode_mass;
    }
    return r;
}

std::vector<ModeBoundRow> mode_bound_table(const std::vector<int>& n_list) {
    std::vector<ModeBoundRow> out;
    out.reserve(n_list.size());
    for (int n : n_list) {
        EulerianDist d = EulerianDist::for_n(n);
        double m = d.mass(d.mode_index());
        out.push_back({n, m, std::sqrt(static_cast<double>(n)) * m});
    }
    return out;
}

NormalApprox NormalApprox::for_n(int n) {
    require_positive_n(n, "NormalApprox::for_n");
    return {(n - 1) / 2.0, (n + 1) / 12.0};
}

double NormalApprox::cdf(double x) const {
    return 0.5 * std::erfc(-(x - mu) / std::sqrt(2.0 * sigma_sq));
}

double normal_cdf_gap(int n) {
    EulerianDist d = EulerianDist::for_n(n);
    NormalApprox approx = NormalApprox::for_n(n);
    double gap = 0.0;
    double cdf_prev = 0.0;  // F(k-1)
    for (int k = 0; k < n; ++k) {
        double cdf_here = cdf_prev + d.mass(k);
        double phi = approx.cdf(static_cast<double>(k));
        gap = std::max(gap, std::abs(cdf_here - phi));
        gap = std::max(gap, std::abs(cdf_prev - phi));  // left limit at the atom
        cdf_prev = cdf_here;
    }
    return gap;
}

BigInt uniform_below(const BigInt& bound, std::mt19937_64& rng) {
    if (bound <= 0) throw std::invalid_argument("uniform_below: bound must be positive");
    if (bound == 1) return 0;
    unsigned bits = boost::multiprecision::msb(bound) + 1;
    unsigned words = (bits + 63) / 64;
    unsigned top_bits = bits - 64 * (words - 1);
    std::uint64_t top_mask =
        top_bits == 64 ? ~std::uint64_t(0) : ((std::uint64_t(1) << top_bits) - 1);
    for (;;) {
        BigInt v = rng() & top_mask;
        for (unsigned w = 1; w < words; ++w) {
            v <<= 64;
            v |= BigInt(rng());
        }
        if (v < bound) return v;
    }
}

EulerianSampler::EulerianSampler(int n) : n_(n) {
    require_positive_n(n, "EulerianSampler");
    const auto& row = eulerian_row(n);
    cumulative_.reserve(row.size());
    BigInt acc = 0;
    for (const auto& v : row) {
        acc += v;
        cumulative_.push_back(acc);
    }
    total_ = factorial(n);
    if (cumulative_.back() != total_)
        throw std::logic_error("EulerianSampler: cumulative mismatch");
}

int EulerianSampler::sample(std::mt19937_64& rng) const {
    BigInt u = uniform_below(total_, rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<int>(it - cumulative_.begin());
}

ShiftCoupler::ShiftCoupler(int n) : n_(n) {
    require_positive_n(n, "ShiftCoupler");
    total_ = factorial(n);
    // Numerators over n!: P at k is <n,k>, the shifted law Q at k is <n,k-1>.
    // Arrays run over k = 0..n, the union of the two supports.
    overlap_cum_.resize(static_cast<std::size_t>(n) + 1);
    resid_p_cum_.resize(static_cast<std::size_t>(n) + 1);
    resid_q_cum_.resize(static_cast<std::size_t>(n) + 1);
    BigInt oc = 0, pc = 0, qc = 0;
    for (int k = 0; k <= n; ++k) {
        BigInt p = eulerian_number(n, k);
        BigInt q = eulerian_number(n, k - 1);
        BigInt m = std::min(p, q);
        oc += m;
        pc += p - m;
        qc += q - m;
        overlap_cum_[static_cast<std::size_t>(k)] = oc;
        resid_p_cum_[static_cast<std::size_t>(k)] = pc;
        resid_q_cum_[static_cast<std::size_t>(k)] = qc;
    }
    overlap_total_ = oc;
    if (pc != qc || pc != total_ - overlap_total_)
        throw std::logic_error("ShiftCoupler: residual masses inconsistent");
}

BigRat ShiftCoupler::tv_exact() const {
    return BigRat(total_ - overlap_total_, total_);
}

double ShiftCoupler::tv() const { return tv_exact().convert_to<double>(); }

ShiftCoupler::Draw ShiftCoupler::sample(std::mt19937_64& rng) const {
    BigInt u = uniform_below(total_, rng);
    if (u < overlap_total_) {
        // Coupled branch: draw k from min(P,Q); then X = k and Y + 1 = k.
        auto it = std::upper_bound(overlap_cum_.begin(), overlap_cum_.end(), u);
        std::int64_t k = it - overlap_cum_.begin();
        return {k, k - 1, true};
    }
    // Independent residual draws; the residuals have disjoint supports so
    // X = Y + 1 is impossible here.
    BigInt resid_total = total_ - overlap_total_;
    BigInt up = uniform_below(resid_total, rng);
    BigInt uq = uniform_below(resid_total, rng);
    auto itp = std::upper_bound(resid_p_cum_.begin(), resid_p_cum_.end(), up);
    auto itq = std::upper_bound(resid_q_cum_.begin(), resid_q_cum_.end(), uq);
    std::int64_t k0 = itp - resid_p_cum_.begin();
    std::int64_t y = itq - resid_q_cum_.begin();
    if (k0 == y) throw std::logic_error("ShiftCoupler: residual supports overlap");
    return {k0, y - 1, false};
}

}  // namespace arw
