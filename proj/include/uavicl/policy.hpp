#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "uavicl/world.hpp"

namespace uavicl::policy {

using world::Observation;
using world::Provenance;
using world::ScheduleAction;
using world::StepMetrics;

// A proposal plus the telemetry columns that go into the trace.
struct Decision {
    ScheduleAction action;
    std::optional<double> epsilon;
    std::optional<double> perplexity;
    std::optional<double> p_attack;
    std::optional<double> llm_latency_ms;
};

// Recoverable failure to produce an action for one step; the episode loop
// substitutes a fallback.
class PolicyError : public std::runtime_error {
public:
    explicit PolicyError(const std::string& what, Decision telemetry = {})
        : std::runtime_error(what), telemetry_(std::move(telemetry)) {}
    // Telemetry gathered before the failure; its action is meaningless.
    const Decision& telemetry() const noexcept { return telemetry_; }

private:
    Decision telemetry_;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    // Called once before the first step; policies reseed from cfg.seed here.
    virtual void begin_episode(const world::WorldConfig& cfg) { (void)cfg; }
    virtual Decision decide(const Observation& obs) = 0;
    virtual void observe_outcome(const Observation& obs, const ScheduleAction& executed,
                                 const StepMetrics& metrics) {
        (void)obs, (void)executed, (void)metrics;
    }
};

}  // namespace uavicl::policy
