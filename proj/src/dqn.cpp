#include "uavicl/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "uavicl/channel.hpp"
#include "uavicl/config_json.hpp"
#include "uavicl/numfmt.hpp"

namespace uavicl::dqn {

using nlohmann::json;

void DqnHyper::validate() const {
    if (!(lr > 0.0)) throw ConfigError("dqn.lr", "must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("dqn.gamma", "must be in (0,1]");
    if (batch < 1) throw ConfigError("dqn.batch", "must be >= 1");
    if (buffer_capacity < 1) throw ConfigError("dqn.buffer_capacity", "must be >= 1");
    if (target_update_every < 1) throw ConfigError("dqn.target_update_every", "must be >= 1");
    if (!(eps_start > 0.0 && eps_start <= 1.0)) throw ConfigError("dqn.eps_start", "must be in (0,1]");
    if (!(eps_decay > 0.0 && eps_decay <= 1.0)) throw ConfigError("dqn.eps_decay", "must be in (0,1]");
    if (!(eps_min > 0.0 && eps_min <= eps_start)) throw ConfigError("dqn.eps_min", "must be in (0, eps_start]");
    if (episodes < 1) throw ConfigError("dqn.episodes", "must be >= 1");
    if (steps_per_episode < 1) throw ConfigError("dqn.steps_per_episode", "must be >= 1");
    for (int h : hidden)
        if (h < 1) throw ConfigError("dqn.hidden", "layer sizes must be >= 1");
}

json to_json(const DqnHyper& h) {
    return {{"lr", h.lr},
            {"gamma", h.gamma},
            {"batch", h.batch},
            {"buffer_capacity", h.buffer_capacity},
            {"target_update_every", h.target_update_every},
            {"eps_start", h.eps_start},
            {"eps_decay", h.eps_decay},
            {"eps_min", h.eps_min},
            {"episodes", h.episodes},
            {"steps_per_episode", h.steps_per_episode},
            {"hidden", h.hidden},
            {"state_mode", h.state_mode == StateMode::aggregate ? "aggregate" : "per_sensor"},
            {"optimizer", h.optimizer == Optimizer::adam ? "adam" : "sgd"}};
}

void read_json(const json& j, DqnHyper& h) {
    const std::string w = "dqn";
    reject_unknown(j, {"lr", "gamma", "batch", "buffer_capacity", "target_update_every", "eps_start",
                       "eps_decay", "eps_min", "episodes", "steps_per_episode", "hidden", "state_mode", "optimizer"},
                   w);
    read_opt(j, "lr", h.lr, w);
    read_opt(j, "gamma", h.gamma, w);
    read_opt(j, "batch", h.batch, w);
    read_opt(j, "buffer_capacity", h.buffer_capacity, w);
    read_opt(j, "target_update_every", h.target_update_every, w);
    read_opt(j, "eps_start", h.eps_start, w);
    read_opt(j, "eps_decay", h.eps_decay, w);
    read_opt(j, "eps_min", h.eps_min, w);
    read_opt(j, "episodes", h.episodes, w);
    read_opt(j, "steps_per_episode", h.steps_per_episode, w);
    read_opt(j, "hidden", h.hidden, w);
    std::string mode;
    read_opt(j, "state_mode", mode, w);
    if (mode == "aggregate") h.state_mode = StateMode::aggregate;
    else if (mode == "per_sensor") h.state_mode = StateMode::per_sensor;
    else if (!mode.empty()) throw ConfigError("dqn.state_mode", "expected per_sensor or aggregate");
    std::string opt;
    read_opt(j, "optimizer", opt, w);
    if (opt == "adam") h.optimizer = Optimizer::adam;
    else if (opt == "sgd") h.optimizer = Optimizer::sgd;
    else if (!opt.empty()) throw ConfigError("dqn.optimizer", "expected sgd or adam");
}

QNetwork::QNetwork(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("dqn.layers", "need at least input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const double bound = std::sqrt(6.0 / in);
        MatrixXd w(out, in);
        for (int c = 0; c < in; ++c)
            for (int r = 0; r < out; ++r) w(r, c) = rng.uniform(-bound, bound);
        w_.push_back(std::move(w));
        b_.push_back(VectorXd::Zero(out));
    }
}

QNetwork QNetwork::zeros(std::vector<int> sizes) {
    QNetwork n;
    n.sizes_ = std::move(sizes);
    if (n.sizes_.size() < 2) throw ConfigError("dqn.layers", "need at least input and output sizes");
    for (std::size_t l = 0; l + 1 < n.sizes_.size(); ++l) {
        n.w_.push_back(MatrixXd::Zero(n.sizes_[l + 1], n.sizes_[l]));
        n.b_.push_back(VectorXd::Zero(n.sizes_[l + 1]));
    }
    return n;
}

VectorXd QNetwork::forward(const VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim())
        throw RuntimeFault("QNetwork::forward: state has " + std::to_string(x.size()) + " entries, expected " +
                           std::to_string(input_dim()));
    return forward_batch(x);
}

MatrixXd QNetwork::forward_batch(const MatrixXd& x) const {
    if (static_cast<std::size_t>(x.rows()) != input_dim())
        throw RuntimeFault("QNetwork::forward_batch: input dimension mismatch");
    ++forward_calls_;
    MatrixXd a = x;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        MatrixXd z = (w_[l] * a).colwise() + b_[l];
        a = l + 1 < w_.size() ? MatrixXd(z.cwiseMax(0.0)) : z;
    }
    return a;
}

double huber(double x) {
    const double ax = std::abs(x);
    return ax <= 1.0 ? 0.5 * x * x : ax - 0.5;
}

double QNetwork::huber_loss(const MatrixXd& x, const std::vector<int>& actions, const VectorXd& targets,
                            Grad* grad) const {
    const auto n = x.cols();
    if (static_cast<std::size_t>(x.rows()) != input_dim() || static_cast<Eigen::Index>(actions.size()) != n ||
        targets.size() != n)
        throw RuntimeFault("QNetwork::huber_loss: shape mismatch");
    ++forward_calls_;
    std::vector<MatrixXd> acts{x};
    std::vector<MatrixXd> pre;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        pre.push_back((w_[l] * acts.back()).colwise() + b_[l]);
        acts.push_back(l + 1 < w_.size() ? MatrixXd(pre.back().cwiseMax(0.0)) : pre.back());
    }
    const MatrixXd& q = acts.back();
    MatrixXd dq = MatrixXd::Zero(q.rows(), q.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = q(actions[static_cast<std::size_t>(i)], i) - targets(i);
        loss += huber(diff);
        dq(actions[static_cast<std::size_t>(i)], i) = std::clamp(diff, -1.0, 1.0) / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);
    if (!grad) return loss;

    grad->dw.assign(w_.size(), {});
    grad->db.assign(w_.size(), {});
    MatrixXd delta = dq;
    for (std::size_t l = w_.size(); l-- > 0;) {
        grad->dw[l] = delta * acts[l].transpose();
        grad->db[l] = delta.rowwise().sum();
        if (l == 0) break;
        delta = (w_[l].transpose() * delta).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
    return loss;
}

void QNetwork::sgd_step(const Grad& g, double lr) {
    for (std::size_t l = 0; l < w_.size(); ++l) {
        w_[l] -= lr * g.dw[l];
        b_[l] -= lr * g.db[l];
    }
}

void Adam::step(QNetwork& net, const QNetwork::Grad& g, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    auto& w = net.weights();
    auto& b = net.biases();
    if (mw_.empty()) {
        for (std::size_t l = 0; l < w.size(); ++l) {
            mw_.push_back(MatrixXd::Zero(w[l].rows(), w[l].cols()));
            vw_.push_back(mw_.back());
            mb_.push_back(VectorXd::Zero(b[l].size()));
            vb_.push_back(mb_.back());
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t l = 0; l < w.size(); ++l) {
        mw_[l] = b1 * mw_[l] + (1.0 - b1) * g.dw[l];
        vw_[l] = b2 * vw_[l] + (1.0 - b2) * g.dw[l].cwiseProduct(g.dw[l]);
        mb_[l] = b1 * mb_[l] + (1.0 - b1) * g.db[l];
        vb_[l] = b2 * vb_[l] + (1.0 - b2) * g.db[l].cwiseProduct(g.db[l]);
        w[l].array() -= lr * (mw_[l].array() / c1) / ((vw_[l].array() / c2).sqrt() + eps);
        b[l].array() -= lr * (mb_[l].array() / c1) / ((vb_[l].array() / c2).sqrt() + eps);
    }
}

bool QNetwork::finite() const {
    for (const auto& w : w_)
        if (!w.allFinite()) return false;
    for (const auto& b : b_)
        if (!b.allFinite()) return false;
    return true;
}

json QNetwork::to_json() const {
    json layers = json::array();
    for (std::size_t l = 0; l < w_.size(); ++l) {
        std::vector<double> w(w_[l].data(), w_[l].data() + w_[l].size());
        std::vector<double> b(b_[l].data(), b_[l].data() + b_[l].size());
        layers.push_back({{"rows", w_[l].rows()}, {"cols", w_[l].cols()}, {"weights_colmajor", w}, {"bias", b}});
    }
    return {{"format", "uavicl.qnetwork"}, {"version", 1}, {"sizes", sizes_}, {"layers", layers}};
}

QNetwork QNetwork::from_json(const json& j) {
    if (j.value("format", "") != "uavicl.qnetwork" || j.value("version", 0) != 1)
        throw ConfigError("dqn_checkpoint", "unsupported network format/version");
    QNetwork n = zeros(j.at("sizes").get<std::vector<int>>());
    const auto& layers = j.at("layers");
    if (layers.size() != n.w_.size()) throw ConfigError("dqn_checkpoint", "layer count mismatch");
    for (std::size_t l = 0; l < n.w_.size(); ++l) {
        const auto w = layers[l].at("weights_colmajor").get<std::vector<double>>();
        const auto b = layers[l].at("bias").get<std::vector<double>>();
        if (w.size() != static_cast<std::size_t>(n.w_[l].size()) || b.size() != static_cast<std::size_t>(n.b_[l].size()))
            throw ConfigError("dqn_checkpoint", "layer shape mismatch");
        std::copy(w.begin(), w.end(), n.w_[l].data());
        std::copy(b.begin(), b.end(), n.b_[l].data());
    }
    return n;
}

double epsilon_at(const DqnHyper& h, std::uint64_t k) {
    return std::max(h.eps_min, h.eps_start * std::pow(h.eps_decay, static_cast<double>(k)));
}

int act_epsilon_greedy(const VectorXd& q, double eps, Rng& rng) {
    return act_epsilon_greedy(q, eps, rng, std::vector<bool>(static_cast<std::size_t>(q.size()), true));
}

int act_epsilon_greedy(const VectorXd& q, double eps, Rng& rng, const std::vector<bool>& valid) {
    std::vector<int> ids;
    for (int a = 0; a < q.size(); ++a)
        if (valid[static_cast<std::size_t>(a)]) ids.push_back(a);
    if (ids.empty()) throw RuntimeFault("act_epsilon_greedy: no valid action");
    if (rng.uniform01() < eps) return ids[static_cast<std::size_t>(rng.below(ids.size()))];
    int best = ids.front();
    for (int a : ids)
        if (q(a) > q(best)) best = a;
    return best;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("dqn.buffer_capacity", "must be >= 1");
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
    const std::size_t n = data_.size();
    if (batch > n) throw RuntimeFault("ReplayBuffer: batch larger than buffer");
    // Floyd's algorithm: a uniform subset in O(batch).
    std::unordered_set<std::size_t> chosen;
    std::vector<std::size_t> out;
    out.reserve(batch);
    for (std::size_t j = n - batch; j < n; ++j) {
        const std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
        const std::size_t pick = chosen.count(t) ? j : t;
        chosen.insert(pick);
        out.push_back(pick);
    }
    return out;
}

GainScale gain_scale(const world::WorldConfig& cfg) {
    const channel::Pose3D uav{0.0, 0.0, cfg.altitude_m};
    return {channel::channel_gain_db(uav, {cfg.field_size_m, cfg.field_size_m}, cfg.channel),
            channel::channel_gain_db(uav, {0.0, 0.0}, cfg.channel)};
}

std::size_t state_dim(StateMode mode, int n_sensors) {
    return mode == StateMode::aggregate ? 3 : 3 * static_cast<std::size_t>(n_sensors);
}

VectorXd encode_state(const world::Observation& obs, StateMode mode, const GainScale& scale) {
    const int n = obs.n_sensors;
    VectorXd per = VectorXd::Zero(3 * n);
    const double span = scale.hi_db - scale.lo_db;
    for (const auto& s : obs.sensors) {
        per(3 * s.id) = static_cast<double>(s.queue) / obs.buffer_depth;
        per(3 * s.id + 1) = s.battery_j / obs.battery_capacity_j;
        per(3 * s.id + 2) = span != 0.0 ? std::clamp((s.gain_db - scale.lo_db) / span, 0.0, 1.0) : 1.0;
    }
    if (mode == StateMode::per_sensor) return per;
    VectorXd agg = VectorXd::Zero(3);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) agg(k) += per(3 * i + k) / n;
    return agg;
}

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
    return mix_seed(seed, 1'000'000 + static_cast<std::uint64_t>(episode));
}

namespace {

void copy_params(QNetwork& dst, const QNetwork& src) {
    dst.weights() = src.weights();
    dst.biases() = src.biases();
}

std::vector<bool> alive_mask(const world::Observation& obs) {
    std::vector<bool> m(static_cast<std::size_t>(obs.n_sensors), false);
    for (const auto& s : obs.sensors) m[static_cast<std::size_t>(s.id)] = true;
    return m;
}

}  // namespace

json Checkpoint::to_json() const {
    return {{"format", "uavicl.dqn_checkpoint"},
            {"version", 1},
            {"seed", seed},
            {"hyper", dqn::to_json(hyper)},
            {"network", net.to_json()},
            {"progress",
             {{"episodes_done", progress.episodes_done},
              {"env_steps", progress.env_steps},
              {"grad_steps", progress.grad_steps},
              {"target_syncs", progress.target_syncs},
              {"episode_reward", progress.episode_reward},
              {"episode_epsilon", progress.episode_epsilon},
              {"episode_j", progress.episode_j},
              {"episode_seed", progress.episode_seed}}}};
}

Checkpoint Checkpoint::from_json(const json& j) {
    if (j.value("format", "") != "uavicl.dqn_checkpoint" || j.value("version", 0) != 1)
        throw ConfigError("dqn_checkpoint", "unsupported checkpoint format/version");
    try {
        Checkpoint c;
        c.seed = j.at("seed").get<std::uint64_t>();
        read_json(j.at("hyper"), c.hyper);
        c.net = QNetwork::from_json(j.at("network"));
        const auto& p = j.at("progress");
        c.progress.episodes_done = p.at("episodes_done").get<int>();
        c.progress.env_steps = p.at("env_steps").get<std::uint64_t>();
        c.progress.grad_steps = p.at("grad_steps").get<std::uint64_t>();
        c.progress.target_syncs = p.at("target_syncs").get<std::uint64_t>();
        c.progress.episode_reward = p.at("episode_reward").get<std::vector<double>>();
        c.progress.episode_epsilon = p.at("episode_epsilon").get<std::vector<double>>();
        c.progress.episode_j = p.at("episode_j").get<std::vector<int>>();
        c.progress.episode_seed = p.at("episode_seed").get<std::vector<std::uint64_t>>();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError("dqn_checkpoint", e.what());
    }
}

TrainResult train(const world::WorldConfig& cfg, const DqnHyper& hyper, std::uint64_t seed,
                  const Checkpoint* resume) {
    hyper.validate();
    cfg.validate();
    std::vector<int> sizes{static_cast<int>(state_dim(hyper.state_mode, cfg.n_sensors))};
    sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
    sizes.push_back(cfg.n_sensors);

    Progress progress = resume ? resume->progress : Progress{};
    Rng rng(mix_seed(seed, 7 + static_cast<std::uint64_t>(progress.episodes_done)));
    QNetwork online = resume ? resume->net : QNetwork(sizes, rng);
    if (online.sizes() != sizes) throw ConfigError("dqn_checkpoint", "network shape does not match config");
    QNetwork target = QNetwork::zeros(sizes);
    copy_params(target, online);
    ReplayBuffer buffer(hyper.buffer_capacity);
    Adam adam;
    Checkpoint last_finite{online, hyper, seed, progress};

    const std::size_t batch = static_cast<std::size_t>(hyper.batch);
    MatrixXd xs(static_cast<Eigen::Index>(sizes.front()), hyper.batch), xn(xs.rows(), xs.cols());
    std::vector<int> actions(batch);
    VectorXd targets(hyper.batch);

    const int first = progress.episodes_done;
    for (int e = first; e < first + hyper.episodes; ++e) {
        world::WorldConfig wc = cfg;
        wc.time_steps = hyper.steps_per_episode;
        wc.seed = episode_seed(seed, e);
        world::World w(wc);
        const GainScale scale = gain_scale(wc);
        auto obs = w.observe();
        VectorXd s = encode_state(obs, hyper.state_mode, scale);
        double reward_sum = 0.0;
        int j_sum = 0;
        while (!w.finished()) {
            const double eps = epsilon_at(hyper, progress.env_steps);
            const int a = act_epsilon_greedy(online.forward(s), eps, rng, alive_mask(obs));
            const auto m = w.step({a, world::Provenance::baseline, {}});
            const double r = -static_cast<double>(m.objective_increment);
            reward_sum += r;
            j_sum += m.objective_increment;
            obs = w.observe();
            VectorXd s2 = encode_state(obs, hyper.state_mode, scale);
            buffer.push({s, a, r, s2, w.finished()});
            ++progress.env_steps;
            s = std::move(s2);

            if (buffer.size() < batch) continue;
            const auto idx = buffer.sample_indices(batch, rng);
            for (std::size_t i = 0; i < batch; ++i) {
                const auto& tr = buffer.at(idx[i]);
                xs.col(static_cast<Eigen::Index>(i)) = tr.state;
                xn.col(static_cast<Eigen::Index>(i)) = tr.next_state;
                actions[i] = tr.action;
            }
            const MatrixXd qn = target.forward_batch(xn);
            for (std::size_t i = 0; i < batch; ++i) {
                const auto& tr = buffer.at(idx[i]);
                const double boot = tr.done ? 0.0 : qn.col(static_cast<Eigen::Index>(i)).maxCoeff();
                targets(static_cast<Eigen::Index>(i)) = tr.reward + hyper.gamma * boot;
            }
            QNetwork::Grad g;
            online.huber_loss(xs, actions, targets, &g);
            if (hyper.optimizer == Optimizer::adam) adam.step(online, g, hyper.lr);
            else online.sgd_step(g, hyper.lr);
            ++progress.grad_steps;
            if (!online.finite())
                throw DivergenceError("non-finite parameters at episode " + std::to_string(e) +
                                          ", gradient step " + std::to_string(progress.grad_steps),
                                      last_finite);
            if (progress.grad_steps % static_cast<std::uint64_t>(hyper.target_update_every) == 0) {
                copy_params(target, online);
                ++progress.target_syncs;
            }
        }
        progress.episode_reward.push_back(reward_sum);
        progress.episode_epsilon.push_back(epsilon_at(hyper, progress.env_steps));
        progress.episode_j.push_back(j_sum);
        progress.episode_seed.push_back(wc.seed);
        progress.episodes_done = e + 1;
        last_finite = {online, hyper, seed, progress};
    }
    TrainResult out{online, progress, target.forward_calls(), online.forward_calls()};
    return out;
}

std::string learning_curve_csv(const Progress& p) {
    std::string out = "episode,cumulative_reward,epsilon\n";
    for (std::size_t i = 0; i < p.episode_reward.size(); ++i)
        out += std::to_string(i) + ',' + format_double(p.episode_reward[i]) + ',' +
               format_double(p.episode_epsilon[i]) + "\n";
    return out;
}

DqnPolicy::DqnPolicy(QNetwork net, StateMode mode) : net_(std::move(net)), mode_(mode) {}

void DqnPolicy::begin_episode(const world::WorldConfig& cfg) {
    if (net_.output_dim() != static_cast<std::size_t>(cfg.n_sensors) ||
        net_.input_dim() != state_dim(mode_, cfg.n_sensors))
        throw ConfigError("dqn_checkpoint", "network does not match the world's sensor count");
    scale_ = gain_scale(cfg);
}

policy::Decision DqnPolicy::decide(const world::Observation& obs) {
    Rng unused(0);
    const VectorXd q = net_.forward(encode_state(obs, mode_, scale_));
    const int a = act_epsilon_greedy(q, 0.0, unused, alive_mask(obs));
    return {{a, world::Provenance::baseline, "greedy Q-value"}};
}

}  // namespace uavicl::dqn
