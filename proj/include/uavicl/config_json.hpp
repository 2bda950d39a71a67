#pragma once

#include <nlohmann/json.hpp>

#include "uavicl/errors.hpp"
#include "uavicl/guardrails.hpp"
#include "uavicl/world.hpp"

// JSON mapping for the shared configuration types. Readers accept partial
// objects: missing keys keep their defaults; unknown keys are rejected.
namespace uavicl {

nlohmann::json to_json(const channel::ChannelParams& p);
nlohmann::json to_json(const world::WorldConfig& c);
nlohmann::json to_json(const guard::SafetyWeights& w);

void read_json(const nlohmann::json& j, channel::ChannelParams& p);
void read_json(const nlohmann::json& j, world::WorldConfig& c);
void read_json(const nlohmann::json& j, guard::SafetyWeights& w);

// Throws ConfigError(`where`.key) for any key of `j` not in `allowed`.
void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& where);

// Fetches j[key] into out when present; wraps type errors as ConfigError.
template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + "." + key, e.what());
    }
}

}  // namespace uavicl
