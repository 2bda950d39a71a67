#include "uavicl/attack.hpp"

#include "uavicl/errors.hpp"
#include "uavicl/numfmt.hpp"
#include "uavicl/parallel.hpp"

namespace uavicl::attack {

void AttackSpec::validate(int time_steps) const {
    if (start_step < 0 || start_step >= time_steps)
        throw ConfigError("attack.start_step", "must lie within the episode");
    if (demo.example_input.empty() && demo.example_output.empty())
        throw ConfigError("attack.payload", "empty demonstration");
}

icl::TaskPrompt inject_malicious_demo(const icl::TaskPrompt& prompt, const AttackSpec& spec) {
    icl::TaskPrompt out = prompt;
    icl::Demonstration d = spec.demo;
    d.tag = icl::DemoTag::injected;
    out.examples.push_back(std::move(d));
    return out;
}

icl::PromptTransform make_injector(AttackSpec spec) {
    return [spec = std::move(spec)](const icl::TaskPrompt& p, int t) {
        return t >= spec.start_step ? inject_malicious_demo(p, spec) : p;
    };
}

namespace {

struct Pair {
    sim::EpisodeTrace normal;
    sim::EpisodeTrace attacked;
};

std::vector<double> mean_curve(const std::vector<sim::EpisodeTrace>& traces) {
    std::vector<double> c;
    if (traces.empty()) return c;
    c.assign(traces.front().steps.size(), 0.0);
    for (const auto& t : traces)
        for (std::size_t i = 0; i < c.size() && i < t.steps.size(); ++i) c[i] += t.steps[i].packets_lost();
    for (auto& v : c) v /= static_cast<double>(traces.size());
    return c;
}

}  // namespace

ImpactReport run_attack_experiment(const world::WorldConfig& cfg, const PolicyFactory& make_policy,
                                   const sim::EpisodeHooks& hooks, const AttackSpec& spec,
                                   std::span<const std::uint64_t> seeds, int jobs) {
    spec.validate(cfg.time_steps);
    if (seeds.empty()) throw ConfigError("seeds", "attack experiment needs at least one seed");
    auto pairs = parallel_map(seeds.size(), jobs, [&](std::size_t i) {
        world::WorldConfig c = cfg;
        c.seed = seeds[i];
        Pair p;
        auto normal = make_policy({});
        p.normal = sim::run_episode(c, *normal, hooks);
        auto attacked = make_policy(make_injector(spec));
        p.attacked = sim::run_episode(c, *attacked, hooks);
        return p;
    });

    ImpactReport r;
    r.seeds = seeds.size();
    long long entered_n = 0, entered_a = 0, lost_n = 0, lost_a = 0;
    for (auto& p : pairs) {
        r.normal_j += p.normal.cumulative_j;
        r.attacked_j += p.attacked.cumulative_j;
        lost_n += p.normal.cumulative_packets_lost;
        lost_a += p.attacked.cumulative_packets_lost;
        entered_n += p.normal.initial_backlog + p.normal.arrivals;
        entered_a += p.attacked.initial_backlog + p.attacked.arrivals;
        r.normal_traces.push_back(std::move(p.normal));
        r.attacked_traces.push_back(std::move(p.attacked));
    }
    const double n = static_cast<double>(r.seeds);
    r.normal_j /= n;
    r.attacked_j /= n;
    r.normal_packets_lost = static_cast<double>(lost_n) / n;
    r.attacked_packets_lost = static_cast<double>(lost_a) / n;
    r.loss_rate_normal_pct = entered_n ? 100.0 * static_cast<double>(lost_n) / static_cast<double>(entered_n) : 0.0;
    r.loss_rate_attacked_pct = entered_a ? 100.0 * static_cast<double>(lost_a) / static_cast<double>(entered_a) : 0.0;
    if (r.loss_rate_normal_pct > 0.0)
        r.degradation_pct = (r.loss_rate_attacked_pct - r.loss_rate_normal_pct) / r.loss_rate_normal_pct * 100.0;
    r.normal_curve = mean_curve(r.normal_traces);
    r.attacked_curve = mean_curve(r.attacked_traces);
    return r;
}

nlohmann::json to_json(const ImpactReport& r) {
    nlohmann::json j = {{"seeds", r.seeds},
                        {"normal_j", r.normal_j},
                        {"attacked_j", r.attacked_j},
                        {"normal_packets_lost", r.normal_packets_lost},
                        {"attacked_packets_lost", r.attacked_packets_lost},
                        {"loss_rate_normal_pct", r.loss_rate_normal_pct},
                        {"loss_rate_attacked_pct", r.loss_rate_attacked_pct},
                        {"normal_curve", r.normal_curve},
                        {"attacked_curve", r.attacked_curve}};
    j["degradation_pct"] = r.degradation_pct ? nlohmann::json(*r.degradation_pct) : nlohmann::json(nullptr);
    return j;
}

std::string impact_csv(const ImpactReport& r) {
    return "scenario,mean_j,mean_packets_lost,loss_rate_pct\n"
           "normal," + format_double(r.normal_j) + ',' + format_double(r.normal_packets_lost) + ',' +
           format_double(r.loss_rate_normal_pct) + "\nattacked," + format_double(r.attacked_j) + ',' +
           format_double(r.attacked_packets_lost) + ',' + format_double(r.loss_rate_attacked_pct) + "\n";
}

std::string curves_csv(const ImpactReport& r) {
    std::string out = "t,normal,attacked\n";
    for (std::size_t i = 0; i < r.normal_curve.size(); ++i)
        out += std::to_string(i) + ',' + format_double(r.normal_curve[i]) + ',' +
               format_double(i < r.attacked_curve.size() ? r.attacked_curve[i] : 0.0) + "\n";
    return out;
}

}  // namespace uavicl::attack
