#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uavicl/guardrails.hpp"
#include "uavicl/policy.hpp"
#include "uavicl/world.hpp"

namespace uavicl::sim {

struct EpisodeHooks {
    std::optional<guard::SafetyWeights> verifier;  // set: every action passes through verify()
};

struct EpisodeTrace {
    std::string config_hash;
    std::uint64_t seed = 0;
    int n_sensors = 0;
    double gamma_th_db = 0.0;
    std::vector<world::StepMetrics> steps;
    int cumulative_j = 0;
    int cumulative_packets_lost = 0;
    int initial_backlog = 0;
    int arrivals = 0;
    std::vector<std::string> log;

    // Packets lost as a percentage of packets that entered the system.
    double loss_rate_pct() const;
};

std::string world_config_hash(const world::WorldConfig& cfg);

EpisodeTrace run_episode(const world::WorldConfig& cfg, policy::Policy& policy,
                         const EpisodeHooks& hooks = {});

std::string trace_csv_header(int n_sensors);
std::string trace_csv(const EpisodeTrace& trace);

}  // namespace uavicl::sim
