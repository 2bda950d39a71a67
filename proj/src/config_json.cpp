#include "uavicl/config_json.hpp"

#include "uavicl/errors.hpp"

namespace uavicl {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where, "expected a JSON object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw ConfigError(where + "." + k, "unknown key");
    }
}

json to_json(const channel::ChannelParams& p) {
    return {{"a", p.a},
            {"b", p.b},
            {"eta_los_db", p.eta_los_db},
            {"eta_nlos_db", p.eta_nlos_db},
            {"carrier_hz", p.carrier_hz},
            {"light_speed", p.light_speed},
            {"coverage_radius_m", p.coverage_radius_m},
            {"range_mode", p.range_mode == channel::RangeMode::slant ? "slant" : "coverage_radius"}};
}

void read_json(const json& j, channel::ChannelParams& p) {
    const std::string w = "world.channel";
    reject_unknown(j, {"a", "b", "eta_los_db", "eta_nlos_db", "carrier_hz", "light_speed",
                       "coverage_radius_m", "range_mode"},
                   w);
    read_opt(j, "a", p.a, w);
    read_opt(j, "b", p.b, w);
    read_opt(j, "eta_los_db", p.eta_los_db, w);
    read_opt(j, "eta_nlos_db", p.eta_nlos_db, w);
    read_opt(j, "carrier_hz", p.carrier_hz, w);
    read_opt(j, "light_speed", p.light_speed, w);
    read_opt(j, "coverage_radius_m", p.coverage_radius_m, w);
    std::string mode;
    read_opt(j, "range_mode", mode, w);
    if (mode == "slant") p.range_mode = channel::RangeMode::slant;
    else if (mode == "coverage_radius") p.range_mode = channel::RangeMode::coverage_radius;
    else if (!mode.empty()) throw ConfigError(w + ".range_mode", "expected slant or coverage_radius");
}

json to_json(const world::WorldConfig& c) {
    json traj = json::array();
    for (const auto& p : c.trajectory) traj.push_back({p.x, p.y, p.h});
    json j = {{"n_sensors", c.n_sensors},
              {"buffer_depth", c.buffer_depth},
              {"time_steps", c.time_steps},
              {"max_tx_power_mw", c.max_tx_power_mw},
              {"battery_capacity_j", c.battery_capacity_j},
              {"slot_s", c.slot_s},
              {"arrival",
               {{"kind", c.arrival.kind == world::ArrivalKind::poisson ? "poisson" : "deterministic"},
                {"rate", c.arrival.rate}}},
              {"field_size_m", c.field_size_m},
              {"altitude_m", c.altitude_m},
              {"trajectory", traj},
              {"drain_per_visit", c.drain_per_visit},
              {"initial_queue", c.initial_queue == world::InitialQueue::uniform ? "uniform" : "empty"},
              {"channel", to_json(c.channel)},
              {"seed", c.seed}};
    j["gamma_th_db"] = c.gamma_th_db ? json(*c.gamma_th_db) : json(nullptr);
    return j;
}

void read_json(const json& j, world::WorldConfig& c) {
    const std::string w = "world";
    reject_unknown(j, {"n_sensors", "buffer_depth", "time_steps", "max_tx_power_mw",
                       "battery_capacity_j", "slot_s", "gamma_th_db", "arrival", "field_size_m",
                       "altitude_m", "trajectory", "drain_per_visit", "initial_queue", "channel", "seed"},
                   w);
    read_opt(j, "n_sensors", c.n_sensors, w);
    read_opt(j, "buffer_depth", c.buffer_depth, w);
    read_opt(j, "time_steps", c.time_steps, w);
    read_opt(j, "max_tx_power_mw", c.max_tx_power_mw, w);
    read_opt(j, "battery_capacity_j", c.battery_capacity_j, w);
    read_opt(j, "slot_s", c.slot_s, w);
    if (j.contains("gamma_th_db")) {
        if (j["gamma_th_db"].is_null()) c.gamma_th_db.reset();
        else {
            double g = 0.0;
            read_opt(j, "gamma_th_db", g, w);
            c.gamma_th_db = g;
        }
    }
    if (j.contains("arrival")) {
        const auto& a = j["arrival"];
        reject_unknown(a, {"kind", "rate"}, "world.arrival");
        std::string kind;
        read_opt(a, "kind", kind, "world.arrival");
        if (kind == "poisson") c.arrival.kind = world::ArrivalKind::poisson;
        else if (kind == "deterministic") c.arrival.kind = world::ArrivalKind::deterministic;
        else if (!kind.empty()) throw ConfigError("world.arrival.kind", "expected deterministic or poisson");
        read_opt(a, "rate", c.arrival.rate, "world.arrival");
    }
    read_opt(j, "field_size_m", c.field_size_m, w);
    read_opt(j, "altitude_m", c.altitude_m, w);
    if (j.contains("trajectory")) {
        c.trajectory.clear();
        const auto& t = j["trajectory"];
        if (!t.is_array()) throw ConfigError("world.trajectory", "expected an array of [x, y, h]");
        for (const auto& p : t) {
            if (!p.is_array() || p.size() != 3) throw ConfigError("world.trajectory", "waypoint must be [x, y, h]");
            try {
                c.trajectory.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
            } catch (const json::exception& e) {
                throw ConfigError("world.trajectory", e.what());
            }
        }
    }
    read_opt(j, "drain_per_visit", c.drain_per_visit, w);
    std::string init;
    read_opt(j, "initial_queue", init, w);
    if (init == "uniform") c.initial_queue = world::InitialQueue::uniform;
    else if (init == "empty") c.initial_queue = world::InitialQueue::empty;
    else if (!init.empty()) throw ConfigError("world.initial_queue", "expected empty or uniform");
    if (j.contains("channel")) read_json(j["channel"], c.channel);
    read_opt(j, "seed", c.seed, w);
}

json to_json(const guard::SafetyWeights& s) {
    json j = {{"w_q", s.w_q}, {"w_gamma", s.w_gamma}, {"w_b", s.w_b}, {"tau_safe", s.tau_safe}};
    j["battery_reserve_j"] = s.battery_reserve_j ? json(*s.battery_reserve_j) : json(nullptr);
    return j;
}

void read_json(const json& j, guard::SafetyWeights& s) {
    const std::string w = "guardrails.safety";
    reject_unknown(j, {"w_q", "w_gamma", "w_b", "tau_safe", "battery_reserve_j"}, w);
    read_opt(j, "w_q", s.w_q, w);
    read_opt(j, "w_gamma", s.w_gamma, w);
    read_opt(j, "w_b", s.w_b, w);
    read_opt(j, "tau_safe", s.tau_safe, w);
    if (j.contains("battery_reserve_j")) {
        if (j["battery_reserve_j"].is_null()) s.battery_reserve_j.reset();
        else {
            double r = 0.0;
            read_opt(j, "battery_reserve_j", r, w);
            s.battery_reserve_j = r;
        }
    }
}

}  // namespace uavicl
