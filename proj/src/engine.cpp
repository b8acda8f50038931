#include "arw/engine.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace arw {

namespace {

// Ordered index set over a dense lattice window, one bit per site.
// Supports the leftmost/rightmost/range/k-th queries the policies need.
class IndexBitset {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    void reset(std::size_t n) {
        n_ = n;
        words_.assign((n + 63) / 64, 0);
        count_ = 0;
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t count() const noexcept { return count_; }
    bool any() const noexcept { return count_ > 0; }

    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }

    void set(std::size_t i) {
        std::uint64_t& w = words_[i >> 6];
        std::uint64_t m = std::uint64_t(1) << (i & 63);
        if (!(w & m)) {
            w |= m;
            ++count_;
        }
    }

    void clear(std::size_t i) {
        std::uint64_t& w = words_[i >> 6];
        std::uint64_t m = std::uint64_t(1) << (i & 63);
        if (w & m) {
            w &= ~m;
            --count_;
        }
    }

    // First set index >= from.
    std::size_t find_from(std::size_t from) const {
        if (from >= n_) return npos;
        std::size_t wi = from >> 6;
        std::uint64_t w = words_[wi] & (~std::uint64_t(0) << (from & 63));
        for (;;) {
            if (w) return (wi << 6) + static_cast<std::size_t>(std::countr_zero(w));
            if (++wi == words_.size()) return npos;
            w = words_[wi];
        }
    }

    // Last set index <= upto.
    std::size_t find_back(std::size_t upto) const {
        if (n_ == 0) return npos;
        if (upto >= n_) upto = n_ - 1;
        std::size_t wi = upto >> 6;
        unsigned r = static_cast<unsigned>(upto & 63);
        std::uint64_t w = words_[wi] &
            (r == 63 ? ~std::uint64_t(0) : ((std::uint64_t(1) << (r + 1)) - 1));
        for (;;) {
            if (w) return (wi << 6) + 63 - static_cast<std::size_t>(std::countl_zero(w));
            if (wi == 0) return npos;
            w = words_[--wi];
        }
    }

    // First set index in [a, b].
    std::size_t find_range(std::size_t a, std::size_t b) const {
        std::size_t r = find_from(a);
        return (r == npos || r > b) ? npos : r;
    }

    // k-th set index, 0-based; requires k < count().
    std::size_t select(std::size_t k) const {
        for (std::size_t wi = 0; wi < words_.size(); ++wi) {
            auto c = static_cast<std::size_t>(std::popcount(words_[wi]));
            if (k < c) {
                std::uint64_t w = words_[wi];
                for (std::size_t j = 0; j < k; ++j) w &= w - 1;
                return (wi << 6) + static_cast<std::size_t>(std::countr_zero(w));
            }
            k -= c;
        }
        return npos;
    }

private:
    std::vector<std::uint64_t> words_;
    std::size_t n_ = 0;
    std::size_t count_ = 0;
};

// Dense working state for one stabilization: site values, cached cursors,
// odometer and the unstable-index set over a window of Z. The window is
// fixed for finite volumes (outside is a sink) and grows on demand for
// global runs. Cursors are pulled from the StackSource lazily on first
// toppling of a site and pushed back only by write_back_cursors(), so a
// discarded run leaves the source untouched.
class DenseRun {
public:
    DenseRun(const Configuration& cfg, StackSource& src, bool finite, Volume vol,
             int threshold, const StabOptions& opts)
        : src_(src), opts_(opts), finite_(finite), threshold_(threshold),
          seed_(src.seed()), p_left_(src.p_left()), p_leftright_(src.p_leftright()),
          policy_rng_(opts.policy_seed) {
        if (finite_) {
            if (vol.lo > vol.hi)
                throw std::invalid_argument("Volume: lo must be <= hi");
            base_ = vol.lo;
            allocate(static_cast<std::size_t>(vol.hi - vol.lo + 1));
            for (const auto& [x, v] : cfg.sites()) {
                if (x < vol.lo || x > vol.hi) {
                    outside_.emplace(x, v);  // frozen: never topples, never moves
                    continue;
                }
                place(static_cast<std::size_t>(x - base_), v);
            }
        } else if (!cfg.empty()) {
            constexpr Site pad = 16;
            base_ = cfg.min_site() - pad;
            allocate(static_cast<std::size_t>(cfg.max_site() - cfg.min_site() + 1 + 2 * pad));
            for (const auto& [x, v] : cfg.sites())
                place(static_cast<std::size_t>(x - base_), v);
        }
        if (opts_.policy == Policy::BlockFirst && !opts_.block)
            throw std::invalid_argument("BlockFirst policy needs a block");
    }

    // Topple until stable (w.r.t. the threshold) or until `budget` more
    // topplings have been spent, in which case CapExceededError is thrown
    // and no cursor write-back happens.
    void run(std::uint64_t budget) {
        std::uint64_t start = topplings_;
        for (;;) {
            std::size_t i = choose();
            if (i == IndexBitset::npos) return;
            if (topplings_ - start >= budget) throw CapExceededError(budget);
            execute(i);
        }
    }

    void add_particle_at(Site x) {
        if (!finite_)
            throw std::logic_error("add_particle_at: global runs take particles up front");
        if (x < base_ || x >= base_ + static_cast<Site>(val_.size()))
            throw std::invalid_argument("add_particle_at: site outside the volume");
        auto i = static_cast<std::size_t>(x - base_);
        val_[i] = val_[i] == sleeping_state ? 2 : val_[i] + 1;  // s + 1 = 2
        ++mass_;  // waking replaces weight 1 with weight 2, still net +1
        if (val_[i] >= threshold_) touch_unstable(i);
    }

    bool is_stable() const { return !unstable_.any(); }

    Configuration extract_config() const {
        Configuration c;
        for (const auto& [x, v] : outside_) c.set(x, v);
        for (std::size_t i = 0; i < val_.size(); ++i)
            if (val_[i] != 0) c.set(base_ + static_cast<Site>(i), val_[i]);
        return c;
    }

    Odometer extract_odometer() const {
        Odometer odo;
        for (std::size_t i = 0; i < odo_.size(); ++i)
            if (odo_[i] != 0) odo.emplace(base_ + static_cast<Site>(i), odo_[i]);
        return odo;
    }

    std::int64_t sleeper_count() const {
        std::int64_t s = 0;
        for (std::int32_t v : val_) s += v == sleeping_state;
        return s;
    }

    std::int64_t mass_in_window() const { return mass_; }

    void write_back_cursors() {
        for (std::size_t i = 0; i < cur_.size(); ++i)
            if (cur_[i] != 0) src_.set_cursor(base_ + static_cast<Site>(i), cur_[i]);
    }

    std::uint64_t topplings() const noexcept { return topplings_; }
    std::uint64_t absorbed_left() const noexcept { return absorbed_left_; }
    std::uint64_t absorbed_right() const noexcept { return absorbed_right_; }

private:
    void allocate(std::size_t n) {
        val_.assign(n, 0);
        cur_.assign(n, 0);
        phase_.assign(n, 0);
        odo_.assign(n, 0);
        unstable_.reset(n);
        lb_hint_ = 0;
        ub_hint_ = n == 0 ? 0 : n - 1;
    }

    void place(std::size_t i, std::int32_t v) {
        val_[i] = v;
        mass_ += v == sleeping_state ? 1 : v;
        if (v >= threshold_) unstable_.set(i);
    }

    void touch_unstable(std::size_t i) {
        unstable_.set(i);
        lb_hint_ = std::min(lb_hint_, i);
        ub_hint_ = std::max(ub_hint_, i);
    }

    std::size_t choose() {
        if (!unstable_.any()) return IndexBitset::npos;
        switch (opts_.policy) {
            case Policy::Leftmost: {
                std::size_t i = unstable_.find_from(lb_hint_);
                lb_hint_ = i;
                return i;
            }
            case Policy::Rightmost: {
                std::size_t i = unstable_.find_back(ub_hint_);
                ub_hint_ = i;
                return i;
            }
            case Policy::RandomLegal: {
                std::uniform_int_distribution<std::size_t> pick(0, unstable_.count() - 1);
                return unstable_.select(pick(policy_rng_));
            }
            case Policy::BlockFirst: {
                Site blo = opts_.block->lo, bhi = opts_.block->hi;
                Site wlo = std::max(blo, base_);
                Site whi = std::min(bhi, base_ + static_cast<Site>(val_.size()) - 1);
                if (wlo <= whi) {
                    auto a = static_cast<std::size_t>(wlo - base_);
                    auto b = static_cast<std::size_t>(whi - base_);
                    std::size_t i = unstable_.find_range(std::max(a, lb_hint_), b);
                    if (i != IndexBitset::npos) return i;
                }
                std::size_t i = unstable_.find_from(lb_hint_);
                lb_hint_ = i;
                return i;
            }
        }
        return IndexBitset::npos;
    }

    // One toppling at window index i (val_[i] >= threshold_ >= 1). The hot
    // path pays one mix64 per instruction: phase_ carries
    // site_base + cursor * golden_gamma so no per-call rehash of (seed, x).
    void execute(std::size_t i) {
        if (cur_[i] == 0) {
            Site x = base_ + static_cast<Site>(i);
            cur_[i] = src_.cursor(x);
            phase_[i] = site_base(seed_, x) + cur_[i] * golden_gamma;
        }
        Instruction t =
            classify_instruction(unit_double(mix64(phase_[i])), p_left_, p_leftright_);
        ++cur_[i];
        phase_[i] += golden_gamma;
        ++odo_[i];
        ++topplings_;
        if (opts_.watch) {
            auto it = opts_.watch->counts.find(base_ + static_cast<Site>(i));
            if (it != opts_.watch->counts.end())
                ++it->second[static_cast<std::size_t>(t)];
        }
        if (t == Instruction::Sleep) {
            if (val_[i] == 1) {  // lone active particle falls asleep
                val_[i] = sleeping_state;
                unstable_.clear(i);
            }
            // multiplicity >= 2: consumed no-op
        } else {
            long long j = static_cast<long long>(i) + (t == Instruction::Left ? -1 : 1);
            --val_[i];
            if (val_[i] < threshold_) unstable_.clear(i);
            if (finite_ && (j < 0 || j >= static_cast<long long>(val_.size()))) {
                ++(j < 0 ? absorbed_left_ : absorbed_right_);
                --mass_;
            } else {
                if (j < 0) {
                    std::size_t g = grow_left();
                    i += g;
                    j += static_cast<long long>(g);
                } else if (j >= static_cast<long long>(val_.size())) {
                    grow_right();
                }
                auto ju = static_cast<std::size_t>(j);
                val_[ju] = val_[ju] == sleeping_state ? 2 : val_[ju] + 1;  // s + 1 = 2
                if (val_[ju] >= threshold_) unstable_.set(ju);
            }
        }
        // New unstable sites can only appear at i-1, i, i+1; keep the
        // leftmost/rightmost search bounds valid without rescans.
        lb_hint_ = std::min(lb_hint_, i > 0 ? i - 1 : 0);
        ub_hint_ = std::max(ub_hint_, std::min(i + 1, val_.size() - 1));
    }

    // Global mode only: widen the window. Left growth shifts all indices by
    // the returned amount.
    std::size_t grow_left() {
        std::size_t g = std::max<std::size_t>(64, val_.size() / 2);
        base_ -= static_cast<Site>(g);
        val_.insert(val_.begin(), g, 0);
        cur_.insert(cur_.begin(), g, 0);
        phase_.insert(phase_.begin(), g, 0);
        odo_.insert(odo_.begin(), g, 0);
        rebuild_bits();
        lb_hint_ += g;
        ub_hint_ += g;
        return g;
    }

    void grow_right() {
        std::size_t g = std::max<std::size_t>(64, val_.size() / 2);
        val_.insert(val_.end(), g, 0);
        cur_.insert(cur_.end(), g, 0);
        phase_.insert(phase_.end(), g, 0);
        odo_.insert(odo_.end(), g, 0);
        rebuild_bits();
    }

    void rebuild_bits() {
        unstable_.reset(val_.size());
        for (std::size_t i = 0; i < val_.size(); ++i)
            if (val_[i] >= threshold_) unstable_.set(i);
    }

    StackSource& src_;
    StabOptions opts_;
    bool finite_;
    int threshold_;
    std::uint64_t seed_;
    double p_left_;
    double p_leftright_;
    Site base_ = 0;
    std::vector<std::int32_t> val_;
    std::vector<std::uint64_t> cur_;    // 0 = not loaded from the source yet
    std::vector<std::uint64_t> phase_;  // site_base + cur * golden_gamma
    std::vector<std::uint64_t> odo_;
    IndexBitset unstable_;
    std::map<Site, std::int32_t> outside_;  // finite mode: frozen spectators
    std::int64_t mass_ = 0;
    std::uint64_t topplings_ = 0;
    std::uint64_t absorbed_left_ = 0;
    std::uint64_t absorbed_right_ = 0;
    std::size_t lb_hint_ = 0;  // lower bound for the leftmost unstable index
    std::size_t ub_hint_ = 0;  // upper bound for the rightmost unstable index
    std::mt19937_64 policy_rng_;
};

StabResult finish(DenseRun& run, std::uint64_t cap) {
    run.run(cap);
    run.write_back_cursors();
    StabResult r;
    r.final_config = run.extract_config();
    r.odometer = run.extract_odometer();
    r.topplings = run.topplings();
    r.absorbed_left = run.absorbed_left();
    r.absorbed_right = run.absorbed_right();
    return r;
}

}  // namespace

std::uint64_t InstructionWatch::at(Site x, Instruction t) const {
    auto it = counts.find(x);
    return it == counts.end() ? 0 : it->second[static_cast<std::size_t>(t)];
}

CapExceededError::CapExceededError(std::uint64_t cap_)
    : std::runtime_error("toppling cap of " + std::to_string(cap_) +
                         " exceeded; run discarded"),
      cap(cap_) {}

IllegalToppleError::IllegalToppleError(Site x)
    : std::logic_error("illegal toppling at stable site " + std::to_string(x)) {}

void topple(Configuration& cfg, Odometer& odo, StackSource& src, Site x) {
    std::int32_t v = cfg.at(x);
    if (v < 1) throw IllegalToppleError(x);
    Instruction t = src.next_instruction(x);
    ++odo[x];
    switch (t) {
        case Instruction::Sleep:
            if (v == 1) cfg.set(x, sleeping_state);
            break;
        case Instruction::Left:
            cfg.set(x, v - 1);
            cfg.add_particle(x - 1);
            break;
        case Instruction::Right:
            cfg.set(x, v - 1);
            cfg.add_particle(x + 1);
            break;
    }
}

StabResult stabilize(const Configuration& cfg, StackSource& src, const StabOptions& opts) {
    DenseRun run(cfg, src, /*finite=*/false, Volume{}, /*threshold=*/1, opts);
    return finish(run, opts.cap);
}

StabResult stabilize_in(const Configuration& cfg, Volume vol, StackSource& src,
                        const StabOptions& opts) {
    DenseRun run(cfg, src, /*finite=*/true, vol, /*threshold=*/1, opts);
    return finish(run, opts.cap);
}

StabResult add_and_stabilize(const Configuration& cfg, Volume vol, StackSource& src,
                             Site x, const StabOptions& opts) {
    if (x < vol.lo || x > vol.hi)
        throw std::invalid_argument("add_and_stabilize: site outside the volume");
    Configuration with = cfg;
    with.add_particle(x);
    return stabilize_in(with, vol, src, opts);
}

StabResult run_flattening(const Configuration& cfg, StackSource& src,
                          const StabOptions& opts) {
    if (cfg.sleeper_count() != 0)
        throw std::invalid_argument("run_flattening: start must be sleeper-free");
    DenseRun run(cfg, src, /*finite=*/false, Volume{}, /*threshold=*/2, opts);
    return finish(run, opts.cap);
}

struct StabilizationSession::Impl {
    Impl(Volume vol, StackSource& src, const StabOptions& opts)
        : run(Configuration{}, src, /*finite=*/true, vol, /*threshold=*/1, opts),
          cap(opts.cap) {}
    DenseRun run;
    std::uint64_t cap;
};

StabilizationSession::StabilizationSession(Volume vol, StackSource& src, StabOptions opts)
    : impl_(std::make_unique<Impl>(vol, src, opts)) {}

StabilizationSession::~StabilizationSession() {
    try {
        impl_->run.write_back_cursors();
    } catch (...) {
        // set_cursor only rejects values < 1, which the run never produces
    }
}

void StabilizationSession::add_particle(Site x) { impl_->run.add_particle_at(x); }

std::uint64_t StabilizationSession::stabilize_current() {
    std::uint64_t before = impl_->run.topplings();
    impl_->run.run(impl_->cap);
    return impl_->run.topplings() - before;
}

bool StabilizationSession::is_stable() const { return impl_->run.is_stable(); }

std::int64_t StabilizationSession::sleeper_count() const {
    return impl_->run.sleeper_count();
}

std::int64_t StabilizationSession::mass_in_volume() const {
    return impl_->run.mass_in_window();
}

Configuration StabilizationSession::config() const { return impl_->run.extract_config(); }

std::uint64_t StabilizationSession::topplings_total() const { return impl_->run.topplings(); }

std::uint64_t StabilizationSession::absorbed_left() const {
    return impl_->run.absorbed_left();
}

std::uint64_t StabilizationSession::absorbed_right() const {
    return impl_->run.absorbed_right();
}

void StabilizationSession::sync_cursors() { impl_->run.write_back_cursors(); }

}  // namespace arw
