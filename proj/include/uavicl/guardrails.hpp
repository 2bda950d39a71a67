#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "uavicl/world.hpp"

namespace uavicl::guard {

using world::Observation;
using world::ScheduleAction;
using world::SensorObs;

struct SafetyWeights {
    double w_q = 0.4;
    double w_gamma = 0.4;
    double w_b = 0.2;
    double tau_safe = 0.3;
    std::optional<double> battery_reserve_j;  // unset: twice the per-transmission energy

    void validate() const;
    double reserve_for(const Observation& obs) const {
        return battery_reserve_j ? *battery_reserve_j : 2.0 * obs.tx_energy_j;
    }
};

// Gain rescaled to [0, 1] over the sensors in `obs` (1 when all gains are equal).
double normalized_gain(const SensorObs& s, const Observation& obs);

double score_sensor(const SensorObs& s, const Observation& obs, const SafetyWeights& w);

// Pass-through when the proposal scores >= tau_safe, otherwise the argmax-score
// sensor (lowest id on ties) with provenance verifier_override.
ScheduleAction verify(const ScheduleAction& proposed, const Observation& obs, const SafetyWeights& w);
ScheduleAction best_scoring(const Observation& obs, const SafetyWeights& w);

// Character n-gram model with add-k smoothing. Bytes never seen in training
// share one unknown symbol; contexts are left-padded at the start of a text.
class BenignLm {
public:
    static BenignLm train(std::span<const std::string> corpus, int order = 3, double smoothing = 0.1);

    int order() const { return order_; }
    double smoothing() const { return k_; }
    std::size_t vocab_size() const { return static_cast<std::size_t>(vocab_count_) + 1; }

    double conditional(std::string_view context, unsigned char next) const;
    double perplexity(std::string_view text) const;

    // Leave-one-out perplexities of the training texts, recorded at training.
    double median_benign_perplexity() const { return p50_; }
    double p95_benign_perplexity() const { return p95_; }

    nlohmann::json to_json() const;
    static BenignLm from_json(const nlohmann::json& j);

    bool operator==(const BenignLm& o) const;

private:
    struct Context {
        std::int64_t total = 0;
        std::unordered_map<unsigned char, std::int64_t> next;
        bool operator==(const Context&) const = default;
    };

    unsigned char canon(unsigned char c) const;
    std::string context_at(std::string_view text, std::size_t i) const;
    double prob_from(std::int64_t count, std::int64_t total) const;

    int order_ = 3;
    double k_ = 0.1;
    std::array<bool, 256> in_vocab_{};
    int vocab_count_ = 0;
    std::unordered_map<std::string, Context> table_;
    double p50_ = 1.0;
    double p95_ = 1.0;
};

struct DefenseParams {
    double tau_perplex = 1.0;
    double logistic_scale = 1.0;
    double eps_base = 0.05;

    void validate() const;
};

// tau = benign p95; scale puts the benign median at P_attack = 0.05.
DefenseParams calibrate_defense(const BenignLm& lm, double eps_base = 0.05);

double attack_probability(double perplexity, const DefenseParams& p);
double update_epsilon(double eps, double p_attack);

}  // namespace uavicl::guard
