#include "uavicl/icldc.hpp"

#include "uavicl/baselines.hpp"
#include "uavicl/errors.hpp"

namespace uavicl::icl {

IcldcPolicy::IcldcPolicy(std::shared_ptr<LlmBackend> backend, IcldcOptions opts, PromptTransform transform)
    : backend_(std::move(backend)),
      opts_(std::move(opts)),
      transform_(std::move(transform)),
      ledger_(opts_.prompt.feedback_window) {
    if (!backend_) throw ConfigError("backend", "ICLDC needs a backend");
    opts_.prompt.validate();
    if (opts_.defense) {
        if (!opts_.defense->lm) throw ConfigError("guardrails.defense", "no benign language model");
        opts_.defense->params.validate();
    }
}

void IcldcPolicy::begin_episode(const world::WorldConfig& cfg) {
    ledger_ = FeedbackLedger(opts_.prompt.feedback_window);
    rng_ = Rng(mix_seed(cfg.seed, opts_.stream));
}

policy::Decision IcldcPolicy::decide(const Observation& obs) {
    TaskPrompt prompt = build_task_description(obs, ledger_, opts_.demos, opts_.prompt);
    if (transform_) prompt = transform_(prompt, obs.t);
    last_prompt_ = prompt;

    policy::Decision d;
    if (opts_.defense) {
        const auto& def = *opts_.defense;
        const double ppl = def.lm->perplexity(prompt.user_text());
        const double p = guard::attack_probability(ppl, def.params);
        const double eps = guard::update_epsilon(def.params.eps_base, p);
        d.perplexity = ppl;
        d.p_attack = p;
        d.epsilon = eps;
        if (rng_.uniform01() < eps) {
            d.action = policy::select_random_safe(obs, rng_);
            return d;
        }
    }
    LlmReply reply;
    try {
        reply = query_backend(*backend_, prompt, obs.n_sensors);
    } catch (const BackendError& e) {
        if (e.kind() == BackendErrorKind::auth) throw;
        throw policy::PolicyError(std::string("backend: ") + e.what(), d);
    }
    d.llm_latency_ms = reply.latency_ms;
    if (!reply.parsed) throw policy::PolicyError("unusable reply: " + reply.parse_error, d);
    d.action = {reply.parsed->selected_sensor_id, world::Provenance::llm, reply.parsed->rationale};
    return d;
}

void IcldcPolicy::observe_outcome(const Observation& obs, const ScheduleAction& executed,
                                  const StepMetrics& metrics) {
    record_feedback(ledger_, obs, executed, metrics);
}

}  // namespace uavicl::icl
