#include "uavicl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uavicl/baselines.hpp"
#include "uavicl/config_json.hpp"
#include "uavicl/errors.hpp"
#include "uavicl/numfmt.hpp"
#include "uavicl/parallel.hpp"

namespace uavicl::exp {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::uint64_t> ExperimentConfig::default_seeds(int n) {
    std::vector<std::uint64_t> s;
    for (int i = 1; i <= n; ++i) s.push_back(static_cast<std::uint64_t>(i));
    return s;
}

namespace {

void read_prompt(const json& j, icl::PromptConfig& p) {
    const std::string w = "policy.prompt";
    reject_unknown(j, {"feedback_window", "token_budget", "chars_per_token"}, w);
    read_opt(j, "feedback_window", p.feedback_window, w);
    read_opt(j, "token_budget", p.token_budget, w);
    read_opt(j, "chars_per_token", p.chars_per_token, w);
}

void read_policy(const json& j, PolicyConfig& p) {
    const std::string w = "policy";
    reject_unknown(j, {"name", "mqns_radius_m", "dqn_checkpoint", "prompt", "benign_demo"}, w);
    read_opt(j, "name", p.name, w);
    read_opt(j, "mqns_radius_m", p.mqns_radius_m, w);
    read_opt(j, "dqn_checkpoint", p.dqn_checkpoint, w);
    read_opt(j, "benign_demo", p.benign_demo, w);
    if (j.contains("prompt")) read_prompt(j["prompt"], p.prompt);
}

void read_optional_double(const json& j, const char* key, std::optional<double>& out, const std::string& w) {
    if (!j.contains(key)) return;
    if (j[key].is_null()) {
        out.reset();
        return;
    }
    double v = 0.0;
    read_opt(j, key, v, w);
    out = v;
}

void read_guardrails(const json& j, GuardrailConfig& g) {
    const std::string w = "guardrails";
    reject_unknown(j, {"verifier", "defense", "safety", "eps_base", "tau_perplex", "logistic_scale",
                       "benign_corpus_dir", "benign_lm_file", "lm_order", "lm_smoothing"},
                   w);
    read_opt(j, "verifier", g.verifier, w);
    read_opt(j, "defense", g.defense, w);
    if (j.contains("safety")) read_json(j["safety"], g.safety);
    read_opt(j, "eps_base", g.eps_base, w);
    read_optional_double(j, "tau_perplex", g.tau_perplex, w);
    read_optional_double(j, "logistic_scale", g.logistic_scale, w);
    read_opt(j, "benign_corpus_dir", g.benign_corpus_dir, w);
    read_opt(j, "benign_lm_file", g.benign_lm_file, w);
    read_opt(j, "lm_order", g.lm_order, w);
    read_opt(j, "lm_smoothing", g.lm_smoothing, w);
}

void read_attack(const json& j, AttackConfig& a) {
    const std::string w = "attack";
    reject_unknown(j, {"payload_file", "start_step", "target", "custom_demo"}, w);
    read_opt(j, "payload_file", a.payload_file, w);
    read_opt(j, "start_step", a.start_step, w);
    std::string target;
    read_opt(j, "target", target, w);
    if (target == "custom") a.target = attack::AttackTarget::custom;
    else if (target == "worst_channel") a.target = attack::AttackTarget::worst_channel;
    else if (!target.empty()) throw ConfigError("attack.target", "expected worst_channel or custom");
    if (j.contains("custom_demo")) {
        const auto& d = j["custom_demo"];
        reject_unknown(d, {"example_input", "example_output"}, "attack.custom_demo");
        icl::Demonstration demo;
        demo.tag = icl::DemoTag::injected;
        read_opt(d, "example_input", demo.example_input, "attack.custom_demo");
        read_opt(d, "example_output", demo.example_output, "attack.custom_demo");
        a.custom_demo = demo;
    }
}

void read_backend(const json& j, BackendConfig& b) {
    const std::string w = "backend";
    reject_unknown(j, {"kind", "mock", "base_url", "model", "timeout_ms", "retries", "api_key_env"}, w);
    std::string kind;
    read_opt(j, "kind", kind, w);
    if (kind == "live") b.kind = BackendKind::live;
    else if (kind == "mock") b.kind = BackendKind::mock;
    else if (!kind.empty()) throw ConfigError("backend.kind", "expected mock or live");
    if (j.contains("mock")) {
        const auto& m = j["mock"];
        const std::string mw = "backend.mock";
        reject_unknown(m, {"w_q", "w_gamma", "threshold_screen", "latency_base_ms", "latency_per_kchar_ms"}, mw);
        read_opt(m, "w_q", b.mock.w_q, mw);
        read_opt(m, "w_gamma", b.mock.w_gamma, mw);
        read_opt(m, "threshold_screen", b.mock.threshold_screen, mw);
        read_opt(m, "latency_base_ms", b.mock.latency_base_ms, mw);
        read_opt(m, "latency_per_kchar_ms", b.mock.latency_per_kchar_ms, mw);
    }
    read_opt(j, "base_url", b.endpoint.base_url, w);
    read_opt(j, "model", b.endpoint.model, w);
    read_opt(j, "timeout_ms", b.endpoint.timeout_ms, w);
    read_opt(j, "retries", b.endpoint.retries, w);
    read_opt(j, "api_key_env", b.endpoint.api_key_env, w);
}

std::string read_file(const std::string& path, const std::string& field) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(field, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    reject_unknown(j, {"world", "policy", "guardrails", "attack", "backend", "output_dir", "seeds", "dqn"}, "config");
    if (j.contains("world")) read_json(j["world"], c.world);
    if (j.contains("policy")) read_policy(j["policy"], c.policy);
    if (j.contains("guardrails")) read_guardrails(j["guardrails"], c.guardrails);
    if (j.contains("attack") && !j["attack"].is_null()) {
        AttackConfig a;
        read_attack(j["attack"], a);
        c.attack = a;
    }
    if (j.contains("backend")) read_backend(j["backend"], c.backend);
    read_opt(j, "output_dir", c.output_dir, "config");
    read_opt(j, "seeds", c.seeds, "config");
    if (j.contains("dqn")) dqn::read_json(j["dqn"], c.dqn);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    const std::string text = read_file(path, "config");
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config", path + " is not valid JSON");
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["world"] = uavicl::to_json(c.world);
    j["policy"] = {{"name", c.policy.name},
                   {"mqns_radius_m", c.policy.mqns_radius_m},
                   {"dqn_checkpoint", c.policy.dqn_checkpoint},
                   {"benign_demo", c.policy.benign_demo},
                   {"prompt",
                    {{"feedback_window", c.policy.prompt.feedback_window},
                     {"token_budget", c.policy.prompt.token_budget},
                     {"chars_per_token", c.policy.prompt.chars_per_token}}}};
    const auto& g = c.guardrails;
    j["guardrails"] = {{"verifier", g.verifier},
                       {"defense", g.defense},
                       {"safety", uavicl::to_json(g.safety)},
                       {"eps_base", g.eps_base},
                       {"tau_perplex", g.tau_perplex ? json(*g.tau_perplex) : json(nullptr)},
                       {"logistic_scale", g.logistic_scale ? json(*g.logistic_scale) : json(nullptr)},
                       {"benign_corpus_dir", g.benign_corpus_dir},
                       {"benign_lm_file", g.benign_lm_file},
                       {"lm_order", g.lm_order},
                       {"lm_smoothing", g.lm_smoothing}};
    if (c.attack) {
        json a = {{"payload_file", c.attack->payload_file},
                  {"start_step", c.attack->start_step},
                  {"target", c.attack->target == attack::AttackTarget::custom ? "custom" : "worst_channel"}};
        if (c.attack->custom_demo)
            a["custom_demo"] = {{"example_input", c.attack->custom_demo->example_input},
                                {"example_output", c.attack->custom_demo->example_output}};
        j["attack"] = a;
    } else {
        j["attack"] = nullptr;
    }
    const auto& b = c.backend;
    j["backend"] = {{"kind", b.kind == BackendKind::live ? "live" : "mock"},
                    {"mock",
                     {{"w_q", b.mock.w_q},
                      {"w_gamma", b.mock.w_gamma},
                      {"threshold_screen", b.mock.threshold_screen},
                      {"latency_base_ms", b.mock.latency_base_ms},
                      {"latency_per_kchar_ms", b.mock.latency_per_kchar_ms}}},
                    {"base_url", b.endpoint.base_url},
                    {"model", b.endpoint.model},
                    {"timeout_ms", b.endpoint.timeout_ms},
                    {"retries", b.endpoint.retries},
                    {"api_key_env", b.endpoint.api_key_env}};
    j["output_dir"] = c.output_dir;
    j["seeds"] = c.seeds;
    j["dqn"] = dqn::to_json(c.dqn);
    return j;
}

std::string config_hash(const ExperimentConfig& c) {
    json j = to_json(c);
    j.erase("output_dir");  // where results go does not change them
    return fnv1a_hex(j.dump());
}

void check_policy_name(const std::string& name) {
    static const char* known[] = {"icldc", "maxgain", "mqns", "random", "random_safe", "dqn"};
    for (const char* k : known)
        if (name == k) return;
    if (name.rfind("mqns:", 0) == 0) {
        try {
            std::size_t used = 0;
            const double r = std::stod(name.substr(5), &used);
            if (used == name.size() - 5 && r > 0.0) return;
        } catch (const std::exception&) {
        }
        throw ConfigError("policy.name", "bad MQNS radius in " + name);
    }
    throw ConfigError("policy.name", "unknown policy '" + name + "'");
}

std::string policy_label(const std::string& name) {
    if (name.rfind("mqns:", 0) == 0) return "mqns_r" + name.substr(5);
    return name;
}

void validate(const ExperimentConfig& c) {
    c.world.validate();
    check_policy_name(c.policy.name);
    c.policy.prompt.validate();
    c.guardrails.safety.validate();
    if (!(c.guardrails.eps_base >= 0.0 && c.guardrails.eps_base <= 1.0))
        throw ConfigError("guardrails.eps_base", "must be in [0,1]");
    if (c.seeds.empty()) throw ConfigError("seeds", "need at least one seed");
    c.dqn.validate();
    if (c.backend.kind == BackendKind::live) c.backend.endpoint.validate();
    if (c.attack && (c.attack->start_step < 0 || c.attack->start_step >= c.world.time_steps))
        throw ConfigError("attack.start_step", "must lie within the episode");
}

std::vector<std::string> load_corpus(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("guardrails.benign_corpus_dir", dir + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<std::string> out;
    for (const auto& f : files) out.push_back(read_file(f.string(), "guardrails.benign_corpus_dir"));
    if (out.empty()) throw ConfigError("guardrails.benign_corpus_dir", dir + " holds no .txt prompts");
    return out;
}

Runtime prepare_runtime(const ExperimentConfig& c, const std::vector<std::string>& policies) {
    Runtime rt;
    const bool wants_icldc = std::find(policies.begin(), policies.end(), "icldc") != policies.end();
    if (wants_icldc && c.guardrails.defense) {
        const auto& g = c.guardrails;
        guard::BenignLm lm;
        if (!g.benign_lm_file.empty()) {
            const json j = json::parse(read_file(g.benign_lm_file, "guardrails.benign_lm_file"), nullptr, false);
            if (j.is_discarded()) throw ConfigError("guardrails.benign_lm_file", "not valid JSON");
            lm = guard::BenignLm::from_json(j);
        } else {
            const auto corpus = load_corpus(g.benign_corpus_dir);
            lm = guard::BenignLm::train(corpus, g.lm_order, g.lm_smoothing);
        }
        rt.defense = guard::calibrate_defense(lm, g.eps_base);
        if (g.tau_perplex) rt.defense.tau_perplex = *g.tau_perplex;
        if (g.logistic_scale) rt.defense.logistic_scale = *g.logistic_scale;
        rt.defense.validate();
        rt.lm = std::make_shared<const guard::BenignLm>(std::move(lm));
    }
    if (std::find(policies.begin(), policies.end(), "dqn") != policies.end()) {
        if (c.policy.dqn_checkpoint.empty())
            throw ConfigError("policy.dqn_checkpoint", "the dqn policy needs a trained checkpoint");
        if (!fs::exists(c.policy.dqn_checkpoint))
            throw ConfigError("policy.dqn_checkpoint", c.policy.dqn_checkpoint + " does not exist");
        const json j = json::parse(read_file(c.policy.dqn_checkpoint, "policy.dqn_checkpoint"), nullptr, false);
        if (j.is_discarded()) throw ConfigError("policy.dqn_checkpoint", "not valid JSON");
        const auto ck = dqn::Checkpoint::from_json(j);
        rt.dqn_net = ck.net;
        rt.dqn_mode = ck.hyper.state_mode;
    }
    return rt;
}

std::unique_ptr<policy::Policy> make_policy(const std::string& name, const ExperimentConfig& c, const Runtime& rt,
                                            icl::PromptTransform transform) {
    check_policy_name(name);
    if (name == "maxgain") return std::make_unique<policy::MaxGainPolicy>();
    if (name == "mqns") return std::make_unique<policy::MqnsPolicy>(c.policy.mqns_radius_m);
    if (name.rfind("mqns:", 0) == 0) return std::make_unique<policy::MqnsPolicy>(std::stod(name.substr(5)));
    if (name == "random") return std::make_unique<policy::RandomPolicy>();
    if (name == "random_safe") return std::make_unique<policy::RandomSafePolicy>();
    if (name == "dqn") {
        if (!rt.dqn_net) throw ConfigError("policy.dqn_checkpoint", "no DQN network loaded");
        return std::make_unique<dqn::DqnPolicy>(*rt.dqn_net, rt.dqn_mode);
    }
    std::shared_ptr<icl::LlmBackend> backend;
    if (c.backend.kind == BackendKind::live) backend = std::make_shared<icl::HttpChatBackend>(c.backend.endpoint);
    else backend = std::make_shared<icl::MockBackend>(c.backend.mock);
    icl::IcldcOptions opts;
    opts.prompt = c.policy.prompt;
    if (!c.policy.benign_demo) opts.demos.clear();
    if (c.guardrails.defense) {
        if (!rt.lm) throw ConfigError("guardrails.defense", "runtime has no benign model");
        opts.defense = icl::DefenseSetup{rt.lm, rt.defense};
    }
    return std::make_unique<icl::IcldcPolicy>(std::move(backend), std::move(opts), std::move(transform));
}

sim::EpisodeHooks hooks_for(const std::string& policy_name, const ExperimentConfig& c) {
    sim::EpisodeHooks h;
    if (policy_name == "icldc" && c.guardrails.verifier) h.verifier = c.guardrails.safety;
    return h;
}

SeedStats seed_stats(const std::vector<double>& xs) {
    SeedStats s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

namespace {

std::vector<sim::EpisodeTrace> run_seeds(const ExperimentConfig& c, const std::string& name, const Runtime& rt,
                                         int jobs) {
    const auto hooks = hooks_for(name, c);
    return parallel_map(c.seeds.size(), jobs, [&](std::size_t i) {
        world::WorldConfig wc = c.world;
        wc.seed = c.seeds[i];
        auto p = make_policy(name, c, rt);
        return sim::run_episode(wc, *p, hooks);
    });
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& c, int jobs) {
    validate(c);
    const Runtime rt = prepare_runtime(c, {c.policy.name});
    RunResult r;
    r.traces = run_seeds(c, c.policy.name, rt, jobs);
    std::vector<double> js, lost;
    json per = json::array();
    for (const auto& t : r.traces) {
        js.push_back(t.cumulative_j);
        lost.push_back(t.cumulative_packets_lost);
        per.push_back({{"seed", t.seed},
                       {"cumulative_j", t.cumulative_j},
                       {"cumulative_packets_lost", t.cumulative_packets_lost},
                       {"loss_rate_pct", t.loss_rate_pct()},
                       {"gamma_th_db", t.gamma_th_db},
                       {"log", t.log}});
    }
    const auto sj = seed_stats(js), sl = seed_stats(lost);
    r.summary = {{"policy", c.policy.name},
                 {"config_hash", config_hash(c)},
                 {"seeds", per},
                 {"cumulative_j", {{"mean", sj.mean}, {"stddev", sj.stddev}}},
                 {"cumulative_packets_lost", {{"mean", sl.mean}, {"stddev", sl.stddev}}}};
    return r;
}

CompareResult run_compare(const ExperimentConfig& c, const std::vector<std::string>& policies, int jobs) {
    validate(c);
    if (policies.empty()) throw ConfigError("policies", "need at least one policy");
    for (const auto& p : policies) check_policy_name(p);
    const Runtime rt = prepare_runtime(c, policies);
    CompareResult out;
    for (const auto& name : policies) {
        const auto traces = run_seeds(c, name, rt, jobs);
        std::vector<double> curve(static_cast<std::size_t>(c.world.time_steps), 0.0), lost, js;
        for (const auto& t : traces) {
            for (std::size_t i = 0; i < curve.size(); ++i) curve[i] += t.steps[i].packets_lost();
            lost.push_back(t.cumulative_packets_lost);
            js.push_back(t.cumulative_j);
        }
        for (auto& v : curve) v /= static_cast<double>(traces.size());
        out.labels.push_back(policy_label(name));
        out.mean_curves.push_back(std::move(curve));
        out.cumulative_packets.push_back(seed_stats(lost));
        out.cumulative_j.push_back(seed_stats(js));
    }
    out.csv = "t";
    for (const auto& l : out.labels) out.csv += "," + l;
    out.csv += "\n";
    for (int t = 0; t < c.world.time_steps; ++t) {
        out.csv += std::to_string(t);
        for (const auto& curve : out.mean_curves) out.csv += "," + format_double(curve[static_cast<std::size_t>(t)]);
        out.csv += "\n";
    }
    return out;
}

attack::AttackSpec attack_spec(const ExperimentConfig& c) {
    if (!c.attack) throw ConfigError("attack", "no attack block in the config");
    attack::AttackSpec s;
    s.start_step = c.attack->start_step;
    s.target = c.attack->target;
    if (s.target == attack::AttackTarget::custom) {
        if (!c.attack->custom_demo) throw ConfigError("attack.custom_demo", "custom target needs custom_demo");
        s.demo = *c.attack->custom_demo;
    } else {
        s.demo = icl::load_demonstration(c.attack->payload_file, icl::DemoTag::injected);
    }
    s.demo.tag = icl::DemoTag::injected;
    return s;
}

attack::ImpactReport run_attack(const ExperimentConfig& c, int jobs) {
    validate(c);
    const auto spec = attack_spec(c);
    const Runtime rt = prepare_runtime(c, {"icldc"});
    const auto factory = [&](icl::PromptTransform t) { return make_policy("icldc", c, rt, std::move(t)); };
    return attack::run_attack_experiment(c.world, factory, hooks_for("icldc", c), spec, c.seeds, jobs);
}

std::string format_count(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e18) {
        std::ostringstream ss;
        ss.precision(0);
        ss << std::fixed << v;
        return ss.str();
    }
    return format_double(v);
}

EdgeCapacity edge_capacity(double memory_bytes, int bits) {
    if (!(memory_bytes >= 0.0) || !std::isfinite(memory_bytes))
        throw ConfigError("memory-bytes", "must be a finite number >= 0");
    if (bits != 4 && bits != 8 && bits != 16 && bits != 32)
        throw ConfigError("bits", "supported precisions are 4, 8, 16 and 32 bits");
    return {memory_bytes * 8.0 / bits,
            "Upper bound from weight storage alone; activations, KV cache, runtime buffers and the "
            "operating system take part of the memory, so the deployable model is smaller."};
}

void write_atomic(const std::string& path, const std::string& content) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeFault("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw RuntimeFault("write failed for " + tmp.string());
    }
    fs::rename(tmp, p);
}

json manifest(const ExperimentConfig& c, const std::string& command, const std::vector<std::string>& files) {
    return {{"tool", "uavicl"},
            {"code_version", UAVICL_VERSION},
            {"command", command},
            {"config_hash", config_hash(c)},
            {"seeds", c.seeds},
            {"files", files}};
}

namespace {

class PromptRecorder final : public policy::Policy {
public:
    PromptRecorder(std::unique_ptr<icl::IcldcPolicy> inner, std::vector<std::string>& sink)
        : inner_(std::move(inner)), sink_(sink) {}
    std::string name() const override { return inner_->name(); }
    void begin_episode(const world::WorldConfig& cfg) override { inner_->begin_episode(cfg); }
    policy::Decision decide(const world::Observation& obs) override {
        auto d = inner_->decide(obs);
        sink_.push_back(inner_->last_prompt().user_text());
        return d;
    }
    void observe_outcome(const world::Observation& o, const world::ScheduleAction& a,
                         const world::StepMetrics& m) override {
        inner_->observe_outcome(o, a, m);
    }

private:
    std::unique_ptr<icl::IcldcPolicy> inner_;
    std::vector<std::string>& sink_;
};

}  // namespace

std::vector<std::string> generate_benign_prompts(const ExperimentConfig& c, std::size_t count, std::uint64_t first_seed) {
    std::vector<std::string> prompts;
    ExperimentConfig bc = c;
    bc.guardrails.defense = false;
    bc.backend.kind = BackendKind::mock;
    const Runtime rt;
    for (std::uint64_t seed = first_seed; prompts.size() < count; ++seed) {
        world::WorldConfig wc = bc.world;
        wc.seed = seed;
        auto base = make_policy("icldc", bc, rt);
        std::unique_ptr<icl::IcldcPolicy> inner(static_cast<icl::IcldcPolicy*>(base.release()));
        PromptRecorder rec(std::move(inner), prompts);
        sim::run_episode(wc, rec, hooks_for("icldc", bc));
    }
    prompts.resize(count);
    return prompts;
}

}  // namespace uavicl::exp
