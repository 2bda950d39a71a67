#pragma once

#include <cstdint>
#include <vector>

#include "uavicl/policy.hpp"
#include "uavicl/rng.hpp"

namespace uavicl::policy {

// All selectors throw RuntimeFault when no sensor is alive.
ScheduleAction select_max_gain(const Observation& obs);
ScheduleAction select_mqns(const Observation& obs, double radius_m);

// Uniform over battery-feasible sensors above the gain threshold; failing
// that, over battery-feasible sensors; failing that, over all alive sensors.
ScheduleAction select_random_safe(const Observation& obs, Rng& rng);

// Uniform over alive sensors, no safety screening.
ScheduleAction select_uniform(const Observation& obs, Rng& rng);

bool battery_feasible(const world::SensorObs& s, const Observation& obs);

class MaxGainPolicy final : public Policy {
public:
    std::string name() const override { return "maxgain"; }
    Decision decide(const Observation& obs) override { return {select_max_gain(obs)}; }
};

class MqnsPolicy final : public Policy {
public:
    explicit MqnsPolicy(double radius_m = 30.0);
    std::string name() const override { return "mqns"; }
    Decision decide(const Observation& obs) override { return {select_mqns(obs, radius_m_)}; }

private:
    double radius_m_;
};

// Seeded per episode from cfg.seed and a policy-specific stream id.
class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(std::uint64_t stream = 11) : stream_(stream) {}
    std::string name() const override { return "random"; }
    void begin_episode(const world::WorldConfig& cfg) override;
    Decision decide(const Observation& obs) override { return {select_uniform(obs, rng_)}; }

private:
    std::uint64_t stream_;
    Rng rng_;
};

class RandomSafePolicy final : public Policy {
public:
    explicit RandomSafePolicy(std::uint64_t stream = 12) : stream_(stream) {}
    std::string name() const override { return "random_safe"; }
    void begin_episode(const world::WorldConfig& cfg) override;
    Decision decide(const Observation& obs) override { return {select_random_safe(obs, rng_)}; }

private:
    std::uint64_t stream_;
    Rng rng_;
};

// Replays a precomputed id sequence.
class FixedSchedulePolicy final : public Policy {
public:
    explicit FixedSchedulePolicy(std::vector<int> schedule) : schedule_(std::move(schedule)) {}
    std::string name() const override { return "fixed"; }
    Decision decide(const Observation& obs) override;

private:
    std::vector<int> schedule_;
};

struct OracleResult {
    std::vector<int> schedule;
    int j_star = 0;
};

// Exhaustive search over every length-T schedule; minimizes (J, schedule)
// lexicographically. Refuses instances with more than 5 sensors or 7 steps.
OracleResult brute_force_schedule(const world::WorldConfig& cfg);

}  // namespace uavicl::policy
