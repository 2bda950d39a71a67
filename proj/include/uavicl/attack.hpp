#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavicl/episode.hpp"
#include "uavicl/icldc.hpp"

namespace uavicl::attack {

enum class AttackTarget { worst_channel, custom };

struct AttackSpec {
    icl::Demonstration demo;
    int start_step = 0;
    AttackTarget target = AttackTarget::worst_channel;

    void validate(int time_steps) const;
};

// Appends spec.demo to the examples, tagged injected. Nothing else changes.
icl::TaskPrompt inject_malicious_demo(const icl::TaskPrompt& prompt, const AttackSpec& spec);

// Transform that injects from spec.start_step onwards.
icl::PromptTransform make_injector(AttackSpec spec);

// Builds a fresh policy for one episode, wiring in the given prompt transform
// (empty for the unattacked run).
using PolicyFactory = std::function<std::unique_ptr<policy::Policy>(icl::PromptTransform)>;

struct ImpactReport {
    std::size_t seeds = 0;
    double normal_j = 0.0;
    double attacked_j = 0.0;
    double normal_packets_lost = 0.0;
    double attacked_packets_lost = 0.0;
    double loss_rate_normal_pct = 0.0;
    double loss_rate_attacked_pct = 0.0;
    std::optional<double> degradation_pct;  // unset when the normal rate is 0
    std::vector<double> normal_curve;       // mean packets lost per step
    std::vector<double> attacked_curve;
    std::vector<sim::EpisodeTrace> normal_traces;
    std::vector<sim::EpisodeTrace> attacked_traces;
};

ImpactReport run_attack_experiment(const world::WorldConfig& cfg, const PolicyFactory& make_policy,
                                   const sim::EpisodeHooks& hooks, const AttackSpec& spec,
                                   std::span<const std::uint64_t> seeds, int jobs = 1);

nlohmann::json to_json(const ImpactReport& r);
std::string impact_csv(const ImpactReport& r);
std::string curves_csv(const ImpactReport& r);

}  // namespace uavicl::attack
