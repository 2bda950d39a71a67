#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavicl/attack.hpp"
#include "uavicl/dqn.hpp"
#include "uavicl/episode.hpp"
#include "uavicl/guardrails.hpp"
#include "uavicl/icldc.hpp"
#include "uavicl/llm_backend.hpp"

namespace uavicl::exp {

enum class BackendKind { mock, live };

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    icl::MockConfig mock;
    icl::EndpointConfig endpoint;
};

struct GuardrailConfig {
    bool verifier = true;
    bool defense = true;
    guard::SafetyWeights safety;
    double eps_base = 0.05;
    std::optional<double> tau_perplex;     // unset: calibrated from the corpus
    std::optional<double> logistic_scale;  // unset: calibrated from the corpus
    std::string benign_corpus_dir = std::string(UAVICL_DATA_DIR) + "/benign_corpus";
    std::string benign_lm_file;  // optional pre-trained model, overrides the corpus
    int lm_order = 3;
    double lm_smoothing = 0.1;
};

struct AttackConfig {
    std::string payload_file = std::string(UAVICL_DATA_DIR) + "/attack_payload.json";
    int start_step = 0;
    attack::AttackTarget target = attack::AttackTarget::worst_channel;
    std::optional<icl::Demonstration> custom_demo;
};

struct PolicyConfig {
    std::string name = "icldc";
    double mqns_radius_m = 30.0;
    std::string dqn_checkpoint;
    icl::PromptConfig prompt;
    bool benign_demo = true;
};

struct ExperimentConfig {
    world::WorldConfig world;
    PolicyConfig policy;
    GuardrailConfig guardrails;
    std::optional<AttackConfig> attack;
    BackendConfig backend;
    std::string output_dir = "out";
    std::vector<std::uint64_t> seeds = default_seeds(20);
    dqn::DqnHyper dqn;

    static std::vector<std::uint64_t> default_seeds(int n);
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

// Checks cross-field rules (policy name, live endpoint, key presence, ...).
void validate(const ExperimentConfig& c);

// Shared, immutable resources built once per experiment.
struct Runtime {
    std::shared_ptr<const guard::BenignLm> lm;
    guard::DefenseParams defense;
    std::optional<dqn::QNetwork> dqn_net;
    dqn::StateMode dqn_mode = dqn::StateMode::per_sensor;
};

// Loads the benign model (when the defense is on) and any DQN checkpoint
// referenced by `policies`.
Runtime prepare_runtime(const ExperimentConfig& c, const std::vector<std::string>& policies);

// Policy names: icldc, maxgain, mqns, mqns:<radius>, random, random_safe, dqn.
std::unique_ptr<policy::Policy> make_policy(const std::string& name, const ExperimentConfig& c,
                                            const Runtime& rt, icl::PromptTransform transform = {});
void check_policy_name(const std::string& name);
std::string policy_label(const std::string& name);

sim::EpisodeHooks hooks_for(const std::string& policy_name, const ExperimentConfig& c);

struct SeedStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for one seed
};
SeedStats seed_stats(const std::vector<double>& xs);

struct RunResult {
    std::vector<sim::EpisodeTrace> traces;
    nlohmann::json summary;
};

RunResult run_experiment(const ExperimentConfig& c, int jobs);

struct CompareResult {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> mean_curves;  // per policy, mean packets lost per step
    std::vector<SeedStats> cumulative_packets;
    std::vector<SeedStats> cumulative_j;
    std::string csv;
};
CompareResult run_compare(const ExperimentConfig& c, const std::vector<std::string>& policies, int jobs);

attack::AttackSpec attack_spec(const ExperimentConfig& c);
attack::ImpactReport run_attack(const ExperimentConfig& c, int jobs);

struct EdgeCapacity {
    double parameters = 0.0;
    std::string caveat;
};
EdgeCapacity edge_capacity(double memory_bytes, int bits);
std::string format_count(double v);

// Writes via a temporary file and rename.
void write_atomic(const std::string& path, const std::string& content);

nlohmann::json manifest(const ExperimentConfig& c, const std::string& command,
                        const std::vector<std::string>& files);

// The user-text of every prompt the ICLDC builder produced on `count` steps of
// benign mock runs starting at world seed `first_seed`.
std::vector<std::string> generate_benign_prompts(const ExperimentConfig& c, std::size_t count,
                                                 std::uint64_t first_seed);
std::vector<std::string> load_corpus(const std::string& dir);

}  // namespace uavicl::exp
