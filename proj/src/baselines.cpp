#include "uavicl/baselines.hpp"

#include <limits>

#include "uavicl/errors.hpp"

namespace uavicl::policy {

namespace {

void require_alive(const Observation& obs) {
    if (obs.sensors.empty()) throw RuntimeFault("no alive sensors: episode collapsed");
}

ScheduleAction pick_uniform(const std::vector<int>& ids, Rng& rng, Provenance prov,
                            const char* why) {
    const int id = ids[static_cast<std::size_t>(rng.below(ids.size()))];
    return {id, prov, why};
}

}  // namespace

bool battery_feasible(const world::SensorObs& s, const Observation& obs) {
    return s.battery_j > obs.tx_energy_j;
}

ScheduleAction select_max_gain(const Observation& obs) {
    require_alive(obs);
    const world::SensorObs* best = &obs.sensors.front();
    for (const auto& s : obs.sensors)
        if (s.gain_db > best->gain_db) best = &s;
    return {best->id, Provenance::baseline, "highest channel gain"};
}

ScheduleAction select_mqns(const Observation& obs, double radius_m) {
    require_alive(obs);
    const world::SensorObs* best = nullptr;
    for (const auto& s : obs.sensors)
        if (s.distance_to_uav <= radius_m && (!best || s.queue > best->queue)) best = &s;
    if (best) return {best->id, Provenance::baseline, "longest queue within radius"};
    const world::SensorObs* nearest = &obs.sensors.front();
    for (const auto& s : obs.sensors)
        if (s.distance_to_uav < nearest->distance_to_uav) nearest = &s;
    return {nearest->id, Provenance::baseline, "no sensor within radius; nearest sensor"};
}

ScheduleAction select_random_safe(const Observation& obs, Rng& rng) {
    require_alive(obs);
    std::vector<int> good, feasible, alive;
    for (const auto& s : obs.sensors) {
        alive.push_back(s.id);
        if (!battery_feasible(s, obs)) continue;
        feasible.push_back(s.id);
        if (s.gain_db > obs.gamma_th_db) good.push_back(s.id);
    }
    if (!good.empty()) return pick_uniform(good, rng, Provenance::random_safe, "random safe action");
    if (!feasible.empty())
        return pick_uniform(feasible, rng, Provenance::random_safe,
                            "random action; no sensor above gain threshold");
    return pick_uniform(alive, rng, Provenance::random_safe,
                        "random action; no battery-feasible sensor");
}

ScheduleAction select_uniform(const Observation& obs, Rng& rng) {
    require_alive(obs);
    std::vector<int> alive;
    for (const auto& s : obs.sensors) alive.push_back(s.id);
    return pick_uniform(alive, rng, Provenance::baseline, "uniform random");
}

MqnsPolicy::MqnsPolicy(double radius_m) : radius_m_(radius_m) {
    if (!(radius_m > 0.0)) throw ConfigError("policy.mqns_radius_m", "must be > 0");
}

void RandomPolicy::begin_episode(const world::WorldConfig& cfg) {
    rng_ = Rng(mix_seed(cfg.seed, stream_));
}

void RandomSafePolicy::begin_episode(const world::WorldConfig& cfg) {
    rng_ = Rng(mix_seed(cfg.seed, stream_));
}

Decision FixedSchedulePolicy::decide(const Observation& obs) {
    if (schedule_.empty()) throw PolicyError("empty schedule");
    const int id = schedule_[static_cast<std::size_t>(obs.t) % schedule_.size()];
    return {{id, Provenance::baseline, "fixed schedule"}};
}

namespace {

struct Search {
    std::vector<int> prefix;
    OracleResult best;
    bool found = false;

    void run(const world::World& w, int j) {
        if (found && j >= best.j_star) return;  // later leaves are lexicographically larger
        if (w.finished()) {
            best = {prefix, j};
            found = true;
            return;
        }
        const auto obs = w.observe();
        for (const auto& s : obs.sensors) {
            world::World next = w;
            const auto m = next.step({s.id, Provenance::baseline, {}});
            prefix.push_back(s.id);
            run(next, j + m.objective_increment);
            prefix.pop_back();
        }
    }
};

}  // namespace

OracleResult brute_force_schedule(const world::WorldConfig& cfg) {
    if (cfg.n_sensors > 5 || cfg.time_steps > 7)
        throw ConfigError("oracle", "instance too large for enumeration (need N <= 5, T <= 7)");
    const world::World w(cfg);
    Search s;
    s.run(w, 0);
    if (!s.found) throw RuntimeFault("oracle: no feasible schedule");
    return s.best;
}

}  // namespace uavicl::policy
