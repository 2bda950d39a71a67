#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "uavicl/guardrails.hpp"
#include "uavicl/icl.hpp"
#include "uavicl/llm_backend.hpp"
#include "uavicl/policy.hpp"
#include "uavicl/rng.hpp"

namespace uavicl::icl {

// Rewrites the prompt right before it is scored and sent; receives only the
// prompt and the time step.
using PromptTransform = std::function<TaskPrompt(const TaskPrompt&, int t)>;

struct DefenseSetup {
    std::shared_ptr<const guard::BenignLm> lm;
    guard::DefenseParams params;
};

struct IcldcOptions {
    PromptConfig prompt;
    std::vector<Demonstration> demos{default_benign_demo()};
    std::optional<DefenseSetup> defense;
    std::uint64_t stream = 21;
};

// prompt -> (perplexity defense) -> backend -> parse; feedback from every
// executed step is appended to the ledger for the next prompt.
class IcldcPolicy final : public policy::Policy {
public:
    IcldcPolicy(std::shared_ptr<LlmBackend> backend, IcldcOptions opts, PromptTransform transform = {});

    std::string name() const override { return "icldc"; }
    void begin_episode(const world::WorldConfig& cfg) override;
    policy::Decision decide(const Observation& obs) override;
    void observe_outcome(const Observation& obs, const ScheduleAction& executed,
                         const StepMetrics& metrics) override;

    const TaskPrompt& last_prompt() const { return last_prompt_; }
    const FeedbackLedger& ledger() const { return ledger_; }

private:
    std::shared_ptr<LlmBackend> backend_;
    IcldcOptions opts_;
    PromptTransform transform_;
    FeedbackLedger ledger_;
    Rng rng_;
    TaskPrompt last_prompt_;
};

}  // namespace uavicl::icl
