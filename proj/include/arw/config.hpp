// Sparse particle configurations on Z.
//
// Site values: 0 empty, -1 one sleeping particle, k >= 1 that many active
// particles. A site is stable iff its value is <= 0. |value| is the particle
// count (a sleeper weighs 1). Only nonzero sites are stored.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arw/stacks.hpp"

namespace arw {

inline constexpr std::int32_t sleeping_state = -1;

class Configuration {
public:
    Configuration() = default;

    // n particles at s (n >= 0; n = 0 gives the empty configuration).
    static Configuration point_source(Site s, std::int64_t n);

    std::int32_t at(Site x) const;
    void set(Site x, std::int32_t v);  // v >= -1; v = 0 erases
    void add_particle(Site x);         // wakes a sleeper: s + 1 = 2

    std::int64_t mass() const noexcept { return mass_; }
    std::int64_t sleeper_count() const noexcept { return sleepers_; }
    std::int64_t active_particle_count() const noexcept { return mass_ - sleepers_; }

    bool stable_at(Site x) const { return at(x) < 1; }
    bool is_stable() const;
    std::vector<Site> unstable_sites() const;

    bool empty() const noexcept { return sites_.empty(); }
    std::size_t support_size() const noexcept { return sites_.size(); }
    Site min_site() const;  // throws on empty support
    Site max_site() const;

    const std::map<Site, std::int32_t>& sites() const noexcept { return sites_; }

    bool operator==(const Configuration& o) const { return sites_ == o.sites_; }
    bool operator!=(const Configuration& o) const { return !(*this == o); }

    // {"sites": [[x, state], ...]} with state "s" or an integer k >= 1,
    // ascending in x.
    std::string to_json() const;
    static Configuration from_json(const std::string& text);

private:
    std::map<Site, std::int32_t> sites_;
    std::int64_t mass_ = 0;
    std::int64_t sleepers_ = 0;
};

using Odometer = std::map<Site, std::uint64_t>;

std::uint64_t odometer_total(const Odometer& odo);

}  // namespace arw
