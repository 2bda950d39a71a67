#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uavicl/channel.hpp"
#include "uavicl/rng.hpp"

namespace uavicl::world {

using channel::GroundPos;
using channel::Pose3D;

enum class ArrivalKind { deterministic, poisson };

struct ArrivalSpec {
    ArrivalKind kind = ArrivalKind::deterministic;
    double rate = 1.0;  // packets per sensor per step
};

// Queue occupancy at t=0: empty, or uniform in [0, D] per sensor.
enum class InitialQueue { empty, uniform };

struct WorldConfig {
    int n_sensors = 10;
    int buffer_depth = 40;
    int time_steps = 20;
    double max_tx_power_mw = 100.0;
    double battery_capacity_j = 50.0;
    double slot_s = 1.0;
    std::optional<double> gamma_th_db;  // unset: grid median, see default_gamma_th
    ArrivalSpec arrival;
    double field_size_m = 100.0;
    double altitude_m = 100.0;
    std::vector<Pose3D> trajectory;  // empty: default circle
    int drain_per_visit = 0;         // 0: drain the whole queue
    InitialQueue initial_queue = InitialQueue::uniform;
    channel::ChannelParams channel;
    std::uint64_t seed = 1;

    double tx_energy_j() const { return max_tx_power_mw * 1e-3 * slot_s; }
    void validate() const;
};

Pose3D advance_trajectory(const WorldConfig& cfg, int t);

// Median gain over a 40x25 grid of cell centres with the UAV hovering over the
// field centre at the configured altitude.
double default_gamma_th(const WorldConfig& cfg);
double resolved_gamma_th(const WorldConfig& cfg);

struct SensorState {
    int id = 0;
    GroundPos pos;
    int queue = 0;
    double battery_j = 0.0;
    bool alive = true;
};

struct FrameResult {
    bool beacon_sent = false;
    bool data_received = false;
    bool ack_sent = false;
    int packets_attempted = 0;
    int packets_delivered = 0;
    double energy_used_j = 0.0;
    double gain_db = 0.0;
    bool clamped = false;
};

enum class Provenance { llm, verifier_override, random_safe, baseline };
std::string_view to_string(Provenance p);

struct ScheduleAction {
    int sensor_id = 0;
    Provenance provenance = Provenance::baseline;
    std::string rationale;
};

struct StepMetrics {
    int t = 0;
    int chosen = 0;
    Provenance provenance = Provenance::baseline;
    int f_loss = 0;
    int g_loss = 0;
    int packets_lost_tx = 0;
    int packets_lost_overflow = 0;
    int objective_increment = 0;
    double gain_db = 0.0;
    std::optional<double> epsilon;
    std::optional<double> perplexity;
    std::optional<double> p_attack;
    std::optional<double> llm_latency_ms;
    std::vector<int> queues;
    std::vector<double> batteries;
    int arrivals = 0;
    int packets_delivered = 0;
    bool clamped = false;

    int packets_lost() const { return packets_lost_tx + packets_lost_overflow; }
};

struct SensorObs {
    int id = 0;
    int queue = 0;
    double battery_j = 0.0;
    double gain_db = 0.0;
    GroundPos pos;
    double distance_to_uav = 0.0;
};

struct Observation {
    int t = 0;
    Pose3D uav;
    double gamma_th_db = 0.0;
    int buffer_depth = 1;
    double battery_capacity_j = 1.0;
    double tx_energy_j = 0.0;
    int n_sensors = 0;  // including dead ones; ids range over [0, n_sensors)
    std::vector<SensorObs> sensors;  // alive only, ascending id

    const SensorObs* find(int id) const;
};

class World {
public:
    explicit World(const WorldConfig& cfg);

    const WorldConfig& config() const { return cfg_; }
    int t() const { return t_; }
    bool finished() const { return t_ >= cfg_.time_steps; }
    const Pose3D& uav() const { return uav_; }
    const std::vector<SensorState>& sensors() const { return sensors_; }
    double gamma_th_db() const { return gamma_th_; }
    int initial_backlog() const { return initial_backlog_; }

    Observation observe() const;
    FrameResult exchange_frame(int sensor_id);
    StepMetrics step(const ScheduleAction& action);

private:
    int arrivals_for(int sensor_id);

    WorldConfig cfg_;
    int t_ = 0;
    Pose3D uav_;
    std::vector<SensorState> sensors_;
    Rng rng_;
    double gamma_th_ = 0.0;
    int initial_backlog_ = 0;
};

}  // namespace uavicl::world
