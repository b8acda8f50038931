#include "arw/config.hpp"

#include <stdexcept>
#include <string>

#include "json.hpp"

namespace arw {

namespace {

std::int64_t particle_weight(std::int32_t v) {
    return v == sleeping_state ? 1 : static_cast<std::int64_t>(v);
}

}  // namespace

Configuration Configuration::point_source(Site s, std::int64_t n) {
    if (n < 0) throw std::invalid_argument("point_source: negative mass");
    Configuration c;
    if (n > 0) {
        if (n > INT32_MAX) throw std::invalid_argument("point_source: mass too large");
        c.set(s, static_cast<std::int32_t>(n));
    }
    return c;
}

std::int32_t Configuration::at(Site x) const {
    auto it = sites_.find(x);
    return it == sites_.end() ? 0 : it->second;
}

void Configuration::set(Site x, std::int32_t v) {
    if (v < sleeping_state)
        throw std::invalid_argument("Configuration::set: invalid state " + std::to_string(v));
    std::int32_t old = at(x);
    mass_ += particle_weight(v) - particle_weight(old);
    sleepers_ += (v == sleeping_state ? 1 : 0) - (old == sleeping_state ? 1 : 0);
    if (v == 0)
        sites_.erase(x);
    else
        sites_[x] = v;
}

void Configuration::add_particle(Site x) {
    std::int32_t v = at(x);
    if (v == sleeping_state)
        set(x, 2);  // s + 1 = 2
    else
        set(x, v + 1);
}

bool Configuration::is_stable() const {
    for (const auto& [x, v] : sites_)
        if (v >= 1) return false;
    return true;
}

std::vector<Site> Configuration::unstable_sites() const {
    std::vector<Site> out;
    for (const auto& [x, v] : sites_)
        if (v >= 1) out.push_back(x);
    return out;
}

Site Configuration::min_site() const {
    if (sites_.empty()) throw std::logic_error("min_site: empty configuration");
    return sites_.begin()->first;
}

Site Configuration::max_site() const {
    if (sites_.empty()) throw std::logic_error("max_site: empty configuration");
    return sites_.rbegin()->first;
}

std::string Configuration::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [x, v] : sites_) {
        nlohmann::json entry = nlohmann::json::array();
        entry.push_back(x);
        if (v == sleeping_state)
            entry.push_back("s");
        else
            entry.push_back(v);
        arr.push_back(std::move(entry));
    }
    nlohmann::json root;
    root["sites"] = std::move(arr);
    return root.dump();
}

Configuration Configuration::from_json(const std::string& text) {
    nlohmann::json root = nlohmann::json::parse(text);
    if (!root.is_object() || !root.contains("sites") || !root["sites"].is_array())
        throw std::invalid_argument("Configuration::from_json: expected {\"sites\": [...]}");
    Configuration c;
    for (const auto& entry : root["sites"]) {
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer())
            throw std::invalid_argument("Configuration::from_json: bad site entry");
        Site x = entry[0].get<Site>();
        if (c.at(x) != 0)
            throw std::invalid_argument("Configuration::from_json: duplicate site " +
                                        std::to_string(x));
        if (entry[1].is_string()) {
            if (entry[1].get<std::string>() != "s")
                throw std::invalid_argument("Configuration::from_json: bad state string");
            c.set(x, sleeping_state);
        } else if (entry[1].is_number_integer()) {
            auto k = entry[1].get<std::int64_t>();
            if (k < 1 || k > INT32_MAX)
                throw std::invalid_argument("Configuration::from_json: bad particle count");
            c.set(x, static_cast<std::int32_t>(k));
        } else {
            throw std::invalid_argument("Configuration::from_json: bad state value");
        }
    }
    return c;
}

std::uint64_t odometer_total(const Odometer& odo) {
    std::uint64_t t = 0;
    for (const auto& [x, u] : odo) t += u;
    return t;
}

}  // namespace arw
