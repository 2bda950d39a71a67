#include "uavicl/episode.hpp"

#include "uavicl/baselines.hpp"
#include "uavicl/config_json.hpp"
#include "uavicl/numfmt.hpp"

namespace uavicl::sim {

double EpisodeTrace::loss_rate_pct() const {
    const int entered = initial_backlog + arrivals;
    return entered > 0 ? 100.0 * cumulative_packets_lost / entered : 0.0;
}

std::string world_config_hash(const world::WorldConfig& cfg) { return fnv1a_hex(to_json(cfg).dump()); }

EpisodeTrace run_episode(const world::WorldConfig& cfg, policy::Policy& policy, const EpisodeHooks& hooks) {
    world::World w(cfg);
    EpisodeTrace trace;
    trace.config_hash = world_config_hash(cfg);
    trace.seed = cfg.seed;
    trace.n_sensors = cfg.n_sensors;
    trace.gamma_th_db = w.gamma_th_db();
    trace.initial_backlog = w.initial_backlog();
    trace.log.push_back("gamma_th_db=" + format_double(w.gamma_th_db()));
    Rng fallback_rng(mix_seed(cfg.seed, 99));
    policy.begin_episode(cfg);

    while (!w.finished()) {
        const auto obs = w.observe();
        policy::Decision d;
        try {
            d = policy.decide(obs);
            if (!obs.find(d.action.sensor_id))
                throw policy::PolicyError("proposed sensor " + std::to_string(d.action.sensor_id) +
                                          " is not alive",
                                          d);
        } catch (const policy::PolicyError& e) {
            trace.log.push_back("t=" + std::to_string(obs.t) + " policy failure: " + e.what());
            d = e.telemetry();
            d.action = hooks.verifier ? guard::best_scoring(obs, *hooks.verifier)
                                      : policy::select_random_safe(obs, fallback_rng);
        }
        if (hooks.verifier) d.action = guard::verify(d.action, obs, *hooks.verifier);

        auto m = w.step(d.action);
        m.epsilon = d.epsilon;
        m.perplexity = d.perplexity;
        m.p_attack = d.p_attack;
        m.llm_latency_ms = d.llm_latency_ms;
        if (m.clamped) trace.log.push_back("t=" + std::to_string(m.t) + " elevation clamped");
        policy.observe_outcome(obs, d.action, m);
        trace.cumulative_j += m.objective_increment;
        trace.cumulative_packets_lost += m.packets_lost();
        trace.arrivals += m.arrivals;
        trace.steps.push_back(std::move(m));
    }
    return trace;
}

std::string trace_csv_header(int n_sensors) {
    std::string h =
        "t,chosen,provenance,f_loss,g_loss,packets_lost_tx,packets_lost_overflow,objective_increment,"
        "gain_db,epsilon,perplexity,p_attack,llm_latency_ms";
    for (int i = 0; i < n_sensors; ++i) h += ",q_" + std::to_string(i);
    for (int i = 0; i < n_sensors; ++i) h += ",b_" + std::to_string(i);
    return h + "\n";
}

std::string trace_csv(const EpisodeTrace& trace) {
    std::string out = trace_csv_header(trace.n_sensors);
    for (const auto& m : trace.steps) {
        out += std::to_string(m.t) + ',' + std::to_string(m.chosen) + ',' +
               std::string(world::to_string(m.provenance)) + ',' + std::to_string(m.f_loss) + ',' +
               std::to_string(m.g_loss) + ',' + std::to_string(m.packets_lost_tx) + ',' +
               std::to_string(m.packets_lost_overflow) + ',' + std::to_string(m.objective_increment) +
               ',' + format_double(m.gain_db) + ',' + format_optional(m.epsilon) + ',' +
               format_optional(m.perplexity) + ',' + format_optional(m.p_attack) + ',' +
               format_optional(m.llm_latency_ms);
        for (int q : m.queues) out += ',' + std::to_string(q);
        for (double b : m.batteries) out += ',' + format_double(b);
        out += '\n';
    }
    return out;
}

}  // namespace uavicl::sim
