#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "uavicl/errors.hpp"
#include "uavicl/policy.hpp"
#include "uavicl/rng.hpp"
#include "uavicl/world.hpp"

namespace uavicl::dqn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// per_sensor: 3N features (queue/D, battery/capacity, scaled gain per sensor).
// aggregate: the three per-sensor features averaged, 3 inputs.
enum class StateMode { per_sensor, aggregate };

enum class Optimizer { sgd, adam };

struct DqnHyper {
    double lr = 5e-4;
    double gamma = 0.99;
    int batch = 100;
    std::size_t buffer_capacity = 1'000'000;
    int target_update_every = 3;
    double eps_start = 1.0;
    double eps_decay = 0.9772;
    double eps_min = 0.01;
    int episodes = 1000;
    int steps_per_episode = 30;
    std::vector<int> hidden{400, 300};
    StateMode state_mode = StateMode::per_sensor;
    Optimizer optimizer = Optimizer::adam;

    void validate() const;
};

nlohmann::json to_json(const DqnHyper& h);
void read_json(const nlohmann::json& j, DqnHyper& h);

class QNetwork {
public:
    struct Grad {
        std::vector<MatrixXd> dw;
        std::vector<VectorXd> db;
    };

    QNetwork() = default;
    // He-uniform weights, zero biases.
    QNetwork(std::vector<int> sizes, Rng& rng);
    static QNetwork zeros(std::vector<int> sizes);

    const std::vector<int>& sizes() const { return sizes_; }
    std::size_t input_dim() const { return static_cast<std::size_t>(sizes_.front()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(sizes_.back()); }

    VectorXd forward(const VectorXd& x) const;
    // Columns are samples.
    MatrixXd forward_batch(const MatrixXd& x) const;

    // Mean Huber (delta = 1) loss of Q(x_i, a_i) against targets; fills grad if given.
    double huber_loss(const MatrixXd& x, const std::vector<int>& actions, const VectorXd& targets,
                      Grad* grad) const;
    void sgd_step(const Grad& g, double lr);

    std::vector<MatrixXd>& weights() { return w_; }
    std::vector<VectorXd>& biases() { return b_; }
    const std::vector<MatrixXd>& weights() const { return w_; }
    const std::vector<VectorXd>& biases() const { return b_; }
    bool finite() const;

    // Number of forward passes so far (single or batch).
    std::uint64_t forward_calls() const { return forward_calls_; }

    nlohmann::json to_json() const;
    static QNetwork from_json(const nlohmann::json& j);

private:
    std::vector<int> sizes_;
    std::vector<MatrixXd> w_;
    std::vector<VectorXd> b_;
    mutable std::uint64_t forward_calls_ = 0;
};

double huber(double x);

// Adam with beta1 0.9, beta2 0.999, eps 1e-8; moments sized on first use.
class Adam {
public:
    void step(QNetwork& net, const QNetwork::Grad& g, double lr);
    std::uint64_t steps() const { return t_; }

private:
    std::vector<MatrixXd> mw_, vw_;
    std::vector<VectorXd> mb_, vb_;
    std::uint64_t t_ = 0;
};

double epsilon_at(const DqnHyper& h, std::uint64_t k);
int act_epsilon_greedy(const VectorXd& q, double eps, Rng& rng);
// Same, restricted to actions with valid[a] set.
int act_epsilon_greedy(const VectorXd& q, double eps, Rng& rng, const std::vector<bool>& valid);

struct Transition {
    VectorXd state;
    int action = 0;
    double reward = 0.0;
    VectorXd next_state;
    bool done = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);
    void push(Transition t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return data_.at(i); }
    // Distinct indices, uniform; requires batch <= size().
    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> data_;
};

struct GainScale {
    double lo_db = 0.0;  // gain at the field diagonal
    double hi_db = 0.0;  // gain directly below the UAV
};
GainScale gain_scale(const world::WorldConfig& cfg);

std::size_t state_dim(StateMode mode, int n_sensors);
VectorXd encode_state(const world::Observation& obs, StateMode mode, const GainScale& scale);

struct Progress {
    int episodes_done = 0;
    std::uint64_t env_steps = 0;
    std::uint64_t grad_steps = 0;
    std::uint64_t target_syncs = 0;
    std::vector<double> episode_reward;
    std::vector<double> episode_epsilon;
    std::vector<int> episode_j;
    std::vector<std::uint64_t> episode_seed;
};

struct Checkpoint {
    QNetwork net;
    DqnHyper hyper;
    std::uint64_t seed = 0;
    Progress progress;

    nlohmann::json to_json() const;
    static Checkpoint from_json(const nlohmann::json& j);
};

struct TrainResult {
    QNetwork net;
    Progress progress;
    std::uint64_t target_forward_calls = 0;
    std::uint64_t online_forward_calls = 0;
};

class DivergenceError : public RuntimeFault {
public:
    DivergenceError(const std::string& what, Checkpoint last_finite)
        : RuntimeFault(what), last_finite_(std::move(last_finite)) {}
    const Checkpoint& last_finite() const { return last_finite_; }

private:
    Checkpoint last_finite_;
};

// World seed of training episode e.
std::uint64_t episode_seed(std::uint64_t seed, int episode);

// Trains for hyper.episodes episodes of steps_per_episode steps on worlds
// derived from cfg. `resume` continues a previous run (replay buffer restarts).
TrainResult train(const world::WorldConfig& cfg, const DqnHyper& hyper, std::uint64_t seed,
                  const Checkpoint* resume = nullptr);

std::string learning_curve_csv(const Progress& p);

// Greedy evaluation policy over alive sensors.
class DqnPolicy final : public policy::Policy {
public:
    DqnPolicy(QNetwork net, StateMode mode);
    std::string name() const override { return "dqn"; }
    void begin_episode(const world::WorldConfig& cfg) override;
    policy::Decision decide(const world::Observation& obs) override;

private:
    QNetwork net_;
    StateMode mode_;
    GainScale scale_;
};

}  // namespace uavicl::dqn
