// uavicl: command-line front end for the UAV data-collection simulator.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "uavicl/errors.hpp"
#include "uavicl/experiment.hpp"
#include "uavicl/numfmt.hpp"

namespace fs = std::filesystem;
using namespace uavicl;

namespace {

enum Exit { kOk = 0, kConfig = 1, kBackend = 2, kRuntime = 3 };

struct Common {
    std::string config;
    std::string out;
    int jobs = 1;
    int seeds = 0;
};

exp::ExperimentConfig load(const Common& c) {
    exp::ExperimentConfig cfg = c.config.empty() ? exp::ExperimentConfig{} : exp::load_config(c.config);
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (c.seeds > 0) cfg.seeds = exp::ExperimentConfig::default_seeds(c.seeds);
    if (c.jobs < 1) throw ConfigError("jobs", "must be >= 1");
    return cfg;
}

std::string out_path(const exp::ExperimentConfig& cfg, const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
}

void finish(const exp::ExperimentConfig& cfg, const std::string& command, const std::vector<std::string>& files) {
    exp::write_atomic(out_path(cfg, "manifest.json"), exp::manifest(cfg, command, files).dump(2) + "\n");
}

int cmd_run(const Common& common, std::optional<std::uint64_t> seed) {
    auto cfg = load(common);
    if (seed) cfg.seeds = {*seed};
    const auto r = exp::run_experiment(cfg, common.jobs);
    std::vector<std::string> files;
    for (const auto& t : r.traces) {
        const std::string name = "trace_seed_" + std::to_string(t.seed) + ".csv";
        exp::write_atomic(out_path(cfg, name), sim::trace_csv(t));
        files.push_back(name);
    }
    exp::write_atomic(out_path(cfg, "summary.json"), r.summary.dump(2) + "\n");
    files.push_back("summary.json");
    finish(cfg, "run", files);
    std::cout << "policy " << cfg.policy.name << ": mean cumulative packets lost "
              << format_double(r.summary["cumulative_packets_lost"]["mean"].get<double>()) << " over "
              << r.traces.size() << " seed(s); outputs in " << cfg.output_dir << "\n";
    return kOk;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_compare(const Common& common, const std::string& policies, const std::string& checkpoint) {
    auto cfg = load(common);
    if (!checkpoint.empty()) cfg.policy.dqn_checkpoint = checkpoint;
    const auto names = split_list(policies);
    const auto r = exp::run_compare(cfg, names, common.jobs);
    exp::write_atomic(out_path(cfg, "comparison.csv"), r.csv);
    std::string summary = "policy,mean_cumulative_packets_lost,stddev_cumulative_packets_lost,mean_cumulative_j,stddev_cumulative_j\n";
    for (std::size_t i = 0; i < r.labels.size(); ++i)
        summary += r.labels[i] + ',' + format_double(r.cumulative_packets[i].mean) + ',' +
                   format_double(r.cumulative_packets[i].stddev) + ',' + format_double(r.cumulative_j[i].mean) +
                   ',' + format_double(r.cumulative_j[i].stddev) + "\n";
    exp::write_atomic(out_path(cfg, "comparison_summary.csv"), summary);
    finish(cfg, "compare", {"comparison.csv", "comparison_summary.csv"});
    std::cout << summary;
    return kOk;
}

int cmd_attack(const Common& common) {
    auto cfg = load(common);
    if (!cfg.attack) {
        std::cerr << "error: the config has no \"attack\" block.\n"
                     "usage hint: add e.g. {\"attack\": {\"start_step\": 0}} or use configs/attack.json\n";
        return kConfig;
    }
    const auto r = exp::run_attack(cfg, common.jobs);
    exp::write_atomic(out_path(cfg, "impact.json"), attack::to_json(r).dump(2) + "\n");
    exp::write_atomic(out_path(cfg, "impact.csv"), attack::impact_csv(r));
    exp::write_atomic(out_path(cfg, "attack_curves.csv"), attack::curves_csv(r));
    finish(cfg, "attack", {"impact.json", "impact.csv", "attack_curves.csv"});
    std::cout << "loss rate normal " << format_double(r.loss_rate_normal_pct) << "%, attacked "
              << format_double(r.loss_rate_attacked_pct) << "%";
    if (r.degradation_pct) std::cout << ", degradation " << format_double(*r.degradation_pct) << "%";
    std::cout << "\n";
    return kOk;
}

int cmd_train(const Common& common, int episodes, const std::string& resume) {
    auto cfg = load(common);
    exp::validate(cfg);
    if (episodes > 0) cfg.dqn.episodes = episodes;
    std::optional<dqn::Checkpoint> ck;
    if (!resume.empty()) {
        std::ifstream in(resume);
        if (!in) throw ConfigError("resume", "cannot open " + resume);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ConfigError("resume", "not valid JSON");
        ck = dqn::Checkpoint::from_json(j);
    }
    const std::uint64_t seed = ck ? ck->seed : cfg.world.seed;
    dqn::TrainResult r;
    try {
        r = dqn::train(cfg.world, cfg.dqn, seed, ck ? &*ck : nullptr);
    } catch (const dqn::DivergenceError& e) {
        exp::write_atomic(out_path(cfg, "last_finite_checkpoint.json"), e.last_finite().to_json().dump() + "\n");
        std::cerr << "error: " << e.what() << "; last finite checkpoint saved to "
                  << out_path(cfg, "last_finite_checkpoint.json") << "\n";
        return kRuntime;
    }
    const dqn::Checkpoint out{r.net, cfg.dqn, seed, r.progress};
    exp::write_atomic(out_path(cfg, "dqn_checkpoint.json"), out.to_json().dump() + "\n");
    exp::write_atomic(out_path(cfg, "learning_curve.csv"), dqn::learning_curve_csv(r.progress));
    finish(cfg, "train-dqn", {"dqn_checkpoint.json", "learning_curve.csv"});
    std::cout << "trained " << r.progress.episodes_done << " episode(s), " << r.progress.grad_steps
              << " gradient steps; checkpoint in " << out_path(cfg, "dqn_checkpoint.json") << "\n";
    return kOk;
}

int cmd_edge(double memory, int bits) {
    const auto e = exp::edge_capacity(memory, bits);
    std::cout << "parameters: " << exp::format_count(e.parameters) << "\n" << "note: " << e.caveat << "\n";
    return kOk;
}

int cmd_corpus(const Common& common, std::size_t count, std::uint64_t first_seed, const std::string& dir) {
    const auto cfg = load(common);
    exp::validate(cfg);
    const auto prompts = exp::generate_benign_prompts(cfg, count, first_seed);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "prompt_%03zu.txt", i);
        exp::write_atomic((fs::path(dir) / name).string(), prompts[i]);
    }
    std::cout << "wrote " << prompts.size() << " prompts to " << dir << "\n";
    return kOk;
}

void add_common(CLI::App* sub, Common& c, bool with_seeds) {
    sub->add_option("--config", c.config, "JSON experiment config");
    sub->add_option("--out", c.out, "output directory (overrides output_dir)");
    sub->add_option("--jobs", c.jobs, "parallel seed workers")->check(CLI::PositiveNumber);
    if (with_seeds) sub->add_option("--seeds", c.seeds, "use seeds 1..n")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UAV sensor-network data-collection scheduling simulator"};
    app.require_subcommand(1);
    Common common;

    auto* run = app.add_subcommand("run", "run one policy over the configured seeds");
    add_common(run, common, true);
    std::optional<std::uint64_t> seed;
    run->add_option("--seed", seed, "run a single seed");

    auto* compare = app.add_subcommand("compare", "per-step mean loss for several policies");
    add_common(compare, common, true);
    std::string policies = "icldc,maxgain";
    std::string checkpoint;
    compare->add_option("--policies", policies, "comma list: icldc,maxgain,mqns,mqns:<r>,dqn,random,random_safe");
    compare->add_option("--dqn-checkpoint", checkpoint, "checkpoint for the dqn policy");

    auto* attack = app.add_subcommand("attack", "paired normal/attacked ICLDC runs");
    add_common(attack, common, true);

    auto* train = app.add_subcommand("train-dqn", "train the DQN baseline");
    add_common(train, common, false);
    int episodes = 0;
    std::string resume;
    train->add_option("--episodes", episodes, "override the episode count")->check(CLI::PositiveNumber);
    train->add_option("--resume", resume, "continue from a checkpoint");

    auto* edge = app.add_subcommand("edge-capacity", "parameters that fit in a memory budget");
    double memory = 0.0;
    int bits = 16;
    edge->add_option("--memory-bytes", memory, "memory in bytes")->required();
    edge->add_option("--bits", bits, "bits per parameter (4, 8, 16, 32)")->required();

    auto* corpus = app.add_subcommand("make-corpus", "regenerate the benign prompt corpus");
    add_common(corpus, common, false);
    std::size_t count = 200;
    std::uint64_t first_seed = 900000;
    std::string corpus_dir = std::string(UAVICL_DATA_DIR) + "/benign_corpus";
    corpus->add_option("--count", count, "number of prompts");
    corpus->add_option("--first-seed", first_seed, "first world seed");
    corpus->add_option("--dir", corpus_dir, "target directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        if (*run) return cmd_run(common, seed);
        if (*compare) return cmd_compare(common, policies, checkpoint);
        if (*attack) return cmd_attack(common);
        if (*train) return cmd_train(common, episodes, resume);
        if (*edge) return cmd_edge(memory, bits);
        if (*corpus) return cmd_corpus(common, count, first_seed, corpus_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const icl::BackendError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return kBackend;
    } catch (const std::exception& e) {
        std::cerr << "runtime fault: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}
