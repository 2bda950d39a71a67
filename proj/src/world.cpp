#include "uavicl/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uavicl/errors.hpp"

namespace uavicl::world {

void WorldConfig::validate() const {
    if (n_sensors < 1) throw ConfigError("world.n_sensors", "must be >= 1");
    if (buffer_depth < 1) throw ConfigError("world.buffer_depth", "must be >= 1");
    if (time_steps < 1) throw ConfigError("world.time_steps", "must be >= 1");
    if (!(max_tx_power_mw > 0.0)) throw ConfigError("world.max_tx_power_mw", "must be > 0");
    if (!(battery_capacity_j > 0.0)) throw ConfigError("world.battery_capacity_j", "must be > 0");
    if (!(slot_s > 0.0)) throw ConfigError("world.slot_s", "must be > 0");
    if (gamma_th_db && std::isnan(*gamma_th_db)) throw ConfigError("world.gamma_th_db", "is NaN");
    if (!(arrival.rate >= 0.0) || !std::isfinite(arrival.rate))
        throw ConfigError("world.arrival.rate", "must be finite and >= 0");
    if (!(field_size_m > 0.0)) throw ConfigError("world.field_size_m", "must be > 0");
    if (!(altitude_m > 0.0)) throw ConfigError("world.altitude_m", "must be > 0");
    for (const auto& w : trajectory)
        if (!(w.h > 0.0) || !std::isfinite(w.x) || !std::isfinite(w.y))
            throw ConfigError("world.trajectory", "waypoints need finite x, y and h > 0");
    if (drain_per_visit < 0) throw ConfigError("world.drain_per_visit", "must be >= 0");
    channel.validate();
}

Pose3D advance_trajectory(const WorldConfig& cfg, int t) {
    if (!cfg.trajectory.empty())
        return cfg.trajectory[static_cast<std::size_t>(t) % cfg.trajectory.size()];
    const double c = cfg.field_size_m / 2.0;
    const double r = cfg.field_size_m / 3.0;
    const double theta =
        2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(cfg.time_steps);
    return {c + r * std::cos(theta), c + r * std::sin(theta), cfg.altitude_m};
}

double default_gamma_th(const WorldConfig& cfg) {
    constexpr int nx = 40, ny = 25;
    const Pose3D centre{cfg.field_size_m / 2.0, cfg.field_size_m / 2.0, cfg.altitude_m};
    std::vector<double> g;
    g.reserve(nx * ny);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const GroundPos p{(i + 0.5) * cfg.field_size_m / nx, (j + 0.5) * cfg.field_size_m / ny};
            g.push_back(channel::channel_gain_db(centre, p, cfg.channel));
        }
    std::sort(g.begin(), g.end());
    return 0.5 * (g[g.size() / 2 - 1] + g[g.size() / 2]);
}

double resolved_gamma_th(const WorldConfig& cfg) {
    return cfg.gamma_th_db ? *cfg.gamma_th_db : default_gamma_th(cfg);
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::llm: return "llm";
        case Provenance::verifier_override: return "verifier_override";
        case Provenance::random_safe: return "random_safe";
        case Provenance::baseline: return "baseline";
    }
    return "baseline";
}

const SensorObs* Observation::find(int id) const {
    for (const auto& s : sensors)
        if (s.id == id) return &s;
    return nullptr;
}

World::World(const WorldConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    gamma_th_ = resolved_gamma_th(cfg_);
    uav_ = advance_trajectory(cfg_, 0);
    sensors_.resize(static_cast<std::size_t>(cfg_.n_sensors));
    for (int i = 0; i < cfg_.n_sensors; ++i) {
        auto& s = sensors_[static_cast<std::size_t>(i)];
        s.id = i;
        s.pos.x = rng_.uniform01() * cfg_.field_size_m;
        s.pos.y = rng_.uniform01() * cfg_.field_size_m;
        s.battery_j = cfg_.battery_capacity_j;
    }
    if (cfg_.initial_queue == InitialQueue::uniform)
        for (auto& s : sensors_) {
            s.queue = static_cast<int>(rng_.below(static_cast<std::uint64_t>(cfg_.buffer_depth) + 1));
            initial_backlog_ += s.queue;
        }
}

Observation World::observe() const {
    Observation o;
    o.t = t_;
    o.uav = advance_trajectory(cfg_, t_);
    o.gamma_th_db = gamma_th_;
    o.buffer_depth = cfg_.buffer_depth;
    o.battery_capacity_j = cfg_.battery_capacity_j;
    o.tx_energy_j = cfg_.tx_energy_j();
    o.n_sensors = cfg_.n_sensors;
    for (const auto& s : sensors_) {
        if (!s.alive) continue;
        o.sensors.push_back({s.id, s.queue, s.battery_j,
                             channel::channel_gain_db(o.uav, s.pos, cfg_.channel), s.pos,
                             channel::horizontal_distance(o.uav, s.pos)});
    }
    return o;
}

FrameResult World::exchange_frame(int sensor_id) {
    if (sensor_id < 0 || sensor_id >= cfg_.n_sensors)
        throw RuntimeFault("exchange_frame: sensor id out of range");
    auto& s = sensors_[static_cast<std::size_t>(sensor_id)];
    FrameResult fr;
    fr.beacon_sent = true;
    const auto pl = channel::path_loss(uav_, s.pos, cfg_.channel);
    fr.gain_db = -pl.db;
    fr.clamped = pl.clamped;
    if (!s.alive) return fr;
    const double e_tx = cfg_.tx_energy_j();
    if (s.battery_j < e_tx) {
        s.alive = false;
        return fr;
    }
    const int batch = cfg_.drain_per_visit == 0 ? s.queue : std::min(s.queue, cfg_.drain_per_visit);
    s.battery_j -= e_tx;
    if (s.battery_j <= 0.0) {
        s.battery_j = 0.0;
        s.alive = false;
    }
    fr.energy_used_j = e_tx;
    fr.packets_attempted = batch;
    fr.data_received = fr.gain_db > gamma_th_;
    fr.ack_sent = fr.data_received;
    fr.packets_delivered = fr.data_received ? batch : 0;
    s.queue -= batch;
    return fr;
}

int World::arrivals_for(int sensor_id) {
    if (cfg_.arrival.kind == ArrivalKind::poisson) return rng_.poisson(cfg_.arrival.rate);
    (void)sensor_id;
    const double r = cfg_.arrival.rate;
    return static_cast<int>(std::floor((t_ + 1) * r) - std::floor(t_ * r));
}

StepMetrics World::step(const ScheduleAction& action) {
    if (finished()) throw RuntimeFault("step: episode already finished");
    if (action.sensor_id < 0 || action.sensor_id >= cfg_.n_sensors)
        throw RuntimeFault("step: sensor id out of range");

    StepMetrics m;
    m.t = t_;
    m.chosen = action.sensor_id;
    m.provenance = action.provenance;

    uav_ = advance_trajectory(cfg_, t_);
    const FrameResult fr = exchange_frame(action.sensor_id);
    m.gain_db = fr.gain_db;
    m.clamped = fr.clamped;
    m.packets_delivered = fr.packets_delivered;
    if (!fr.data_received) {
        m.f_loss = 1;
        m.packets_lost_tx = fr.packets_attempted;
    }

    for (auto& s : sensors_) {
        const int a = arrivals_for(s.id);  // drawn for every sensor to keep streams aligned
        if (!s.alive) continue;
        s.queue += a;
        m.arrivals += a;
    }
    for (auto& s : sensors_) {
        if (!s.alive || s.queue <= cfg_.buffer_depth) continue;
        m.packets_lost_overflow += s.queue - cfg_.buffer_depth;
        s.queue = cfg_.buffer_depth;
        if (s.id != action.sensor_id) ++m.g_loss;
    }
    m.objective_increment = m.f_loss + m.g_loss;
    m.queues.reserve(sensors_.size());
    m.batteries.reserve(sensors_.size());
    for (const auto& s : sensors_) {
        m.queues.push_back(s.queue);
        m.batteries.push_back(s.battery_j);
    }
    ++t_;
    uav_ = advance_trajectory(cfg_, t_);
    return m;
}

}  // namespace uavicl::world
