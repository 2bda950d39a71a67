#include <doctest.h>

#include <cmath>
#include <set>

#include "uavicl/dqn.hpp"
#include "uavicl/errors.hpp"

using namespace uavicl;
using namespace uavicl::dqn;

namespace {

double chi_square(const std::vector<int>& counts, double expected) {
    double x = 0.0;
    for (int c : counts) x += (c - expected) * (c - expected) / expected;
    return x;
}

DqnHyper tiny_hyper() {
    DqnHyper h;
    h.episodes = 6;
    h.steps_per_episode = 10;
    h.batch = 8;
    h.hidden = {16, 12};
    return h;
}

world::WorldConfig tiny_world() {
    world::WorldConfig c;
    c.n_sensors = 3;
    return c;
}

}  // namespace

TEST_CASE("defaults follow the stated hyperparameters") {
    DqnHyper h;
    CHECK(h.lr == 5e-4);
    CHECK(h.gamma == 0.99);
    CHECK(h.batch == 100);
    CHECK(h.buffer_capacity == 1'000'000);
    CHECK(h.target_update_every == 3);
    CHECK(h.eps_start == 1.0);
    CHECK(h.eps_decay == 0.9772);
    CHECK(h.eps_min == 0.01);
    CHECK(h.episodes == 1000);
    CHECK(h.steps_per_episode == 30);
    CHECK(h.hidden == std::vector<int>{400, 300});
}

TEST_CASE("forward: zero weights and a hand-computed path") {
    const auto z = QNetwork::zeros({30, 400, 300, 10});
    const VectorXd q = z.forward(VectorXd::Constant(30, 0.7));
    CHECK(q.size() == 10);
    CHECK(q.isZero(0.0));

    auto n = QNetwork::zeros({1, 1, 1, 1});
    n.weights()[0](0, 0) = 2.0;
    n.biases()[0](0) = -1.0;
    n.weights()[1](0, 0) = 3.0;
    n.weights()[2](0, 0) = -0.5;
    n.biases()[2](0) = 4.0;
    // relu(2*1.5-1)=2 -> relu(3*2)=6 -> -0.5*6+4 = 1
    CHECK(n.forward(VectorXd::Constant(1, 1.5))(0) == doctest::Approx(1.0));
    // relu(2*0.2-1)=0 -> 0 -> 4
    CHECK(n.forward(VectorXd::Constant(1, 0.2))(0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(n.forward(VectorXd::Zero(2)), RuntimeFault);
}

TEST_CASE("He-uniform initialization bounds") {
    Rng rng(1);
    QNetwork n({30, 400, 300, 10}, rng);
    for (std::size_t l = 0; l < n.weights().size(); ++l) {
        const double bound = std::sqrt(6.0 / n.sizes()[l]);
        CHECK(n.weights()[l].cwiseAbs().maxCoeff() <= bound);
        CHECK(n.weights()[l].cwiseAbs().maxCoeff() > 0.9 * bound);
        CHECK(n.biases()[l].isZero(0.0));
    }
}

TEST_CASE("huber values") {
    CHECK(huber(0.0) == 0.0);
    CHECK(huber(0.5) == 0.125);
    CHECK(huber(-1.0) == 0.5);
    CHECK(huber(3.0) == 2.5);
    CHECK(huber(-2.0) == 1.5);
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(2024);
    for (int net_i = 0; net_i < 8; ++net_i) {
        const std::vector<int> sizes{2 + static_cast<int>(rng.below(4)), 3 + static_cast<int>(rng.below(5)),
                                     3 + static_cast<int>(rng.below(5)), 2 + static_cast<int>(rng.below(3))};
        QNetwork n(sizes, rng);
        for (auto& b : n.biases())
            for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-0.3, 0.3);
        const int batch = 5;
        MatrixXd x(sizes[0], batch);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
        std::vector<int> acts;
        VectorXd tgt(batch);
        for (int i = 0; i < batch; ++i) {
            acts.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(sizes.back()))));
            tgt(i) = rng.uniform(-3, 3);  // mixes the quadratic and linear loss regions
        }
        QNetwork::Grad g;
        n.huber_loss(x, acts, tgt, &g);

        const double h = 1e-6;
        auto check_param = [&](double& p, double analytic) {
            const double keep = p;
            p = keep + h;
            const double up = n.huber_loss(x, acts, tgt, nullptr);
            p = keep - h;
            const double dn = n.huber_loss(x, acts, tgt, nullptr);
            p = keep;
            const double numeric = (up - dn) / (2 * h);
            const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
            CHECK(std::abs(analytic - numeric) / scale < 1e-4);
        };
        for (std::size_t l = 0; l < n.weights().size(); ++l) {
            auto& w = n.weights()[l];
            for (Eigen::Index i = 0; i < w.size(); ++i) check_param(w.data()[i], g.dw[l].data()[i]);
            auto& b = n.biases()[l];
            for (Eigen::Index i = 0; i < b.size(); ++i) check_param(b(i), g.db[l](i));
        }
    }
}

TEST_CASE("sgd step moves against the gradient") {
    Rng rng(3);
    QNetwork n({3, 8, 8, 2}, rng);
    MatrixXd x = MatrixXd::Random(3, 4);
    const std::vector<int> acts{0, 1, 1, 0};
    const VectorXd tgt = VectorXd::Constant(4, 0.5);
    QNetwork::Grad g;
    const double before = n.huber_loss(x, acts, tgt, &g);
    QNetwork m = n;
    m.sgd_step(g, 1e-3);
    CHECK(m.huber_loss(x, acts, tgt, nullptr) < before);
    CHECK((m.weights()[0] - (n.weights()[0] - 1e-3 * g.dw[0])).cwiseAbs().maxCoeff() == 0.0);
    Adam adam;
    adam.step(n, g, 1e-3);
    CHECK(adam.steps() == 1);
    CHECK(n.huber_loss(x, acts, tgt, nullptr) < before);
}

TEST_CASE("epsilon schedule is exactly max(0.01, 0.9772^k)") {
    DqnHyper h;
    for (std::uint64_t k = 0; k < 2000; ++k)
        CHECK(epsilon_at(h, k) == std::max(0.01, std::pow(0.9772, static_cast<double>(k))));
    CHECK(epsilon_at(h, 0) == 1.0);
    CHECK(epsilon_at(h, 500) == 0.01);
}

TEST_CASE("epsilon-greedy action selection") {
    Rng rng(8);
    VectorXd q(4);
    q << 0.1, 0.9, 0.9, -2.0;
    for (int i = 0; i < 100; ++i) CHECK(act_epsilon_greedy(q, 0.0, rng) == 1);
    CHECK(act_epsilon_greedy(q, 0.0, rng, {true, false, true, true}) == 2);

    std::vector<int> counts(10, 0);
    const VectorXd q10 = VectorXd::LinSpaced(10, 0, 9);
    for (int i = 0; i < 10000; ++i) ++counts[static_cast<std::size_t>(act_epsilon_greedy(q10, 1.0, rng))];
    CHECK(chi_square(counts, 1000.0) < 27.88);  // df 9, p = 0.001
}

TEST_CASE("replay buffer: ring storage, distinct uniform samples") {
    ReplayBuffer b(5);
    for (int i = 0; i < 7; ++i) b.push({VectorXd::Constant(1, i), i, 0.0, VectorXd::Zero(1), false});
    CHECK(b.size() == 5);
    std::multiset<int> held;
    for (std::size_t i = 0; i < b.size(); ++i) held.insert(b.at(i).action);
    CHECK(held == std::multiset<int>{2, 3, 4, 5, 6});

    ReplayBuffer big(100);
    for (int i = 0; i < 50; ++i) big.push({VectorXd::Zero(1), i, 0.0, VectorXd::Zero(1), false});
    Rng rng(12);
    std::vector<int> counts(50, 0);
    for (int rep = 0; rep < 4000; ++rep) {
        const auto idx = big.sample_indices(10, rng);
        CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 10);
        for (auto i : idx) ++counts[i];
    }
    CHECK(chi_square(counts, 800.0) < 85.35);  // df 49, p = 0.001
    CHECK_THROWS_AS(big.sample_indices(51, rng), RuntimeFault);
}

TEST_CASE("state encoding") {
    world::WorldConfig c;
    world::World w(c);
    const auto obs = w.observe();
    const auto scale = gain_scale(c);
    CHECK(scale.hi_db > scale.lo_db);
    const VectorXd s = encode_state(obs, StateMode::per_sensor, scale);
    REQUIRE(s.size() == 30);
    for (const auto& o : obs.sensors) {
        CHECK(s(3 * o.id) == doctest::Approx(o.queue / 40.0));
        CHECK(s(3 * o.id + 1) == doctest::Approx(1.0));
        CHECK(s(3 * o.id + 2) == doctest::Approx((o.gain_db - scale.lo_db) / (scale.hi_db - scale.lo_db)));
    }
    const VectorXd a = encode_state(obs, StateMode::aggregate, scale);
    REQUIRE(a.size() == 3);
    CHECK(a(0) == doctest::Approx((s(0) + s(3) + s(6) + s(9) + s(12) + s(15) + s(18) + s(21) + s(24) + s(27)) / 10));
}

TEST_CASE("training bookkeeping and target-network isolation") {
    const auto h = tiny_hyper();
    const auto r = train(tiny_world(), h, 5);
    CHECK(r.progress.episodes_done == 6);
    CHECK(r.progress.episode_reward.size() == 6);
    CHECK(r.progress.episode_j.size() == 6);
    CHECK(r.progress.env_steps == 60);
    CHECK(r.progress.grad_steps == 60 - 7);  // first step once the buffer holds a batch
    CHECK(r.progress.target_syncs == r.progress.grad_steps / 3);
    // TD targets come from the target net only: one batch pass per gradient step
    CHECK(r.target_forward_calls == r.progress.grad_steps);
    CHECK(r.online_forward_calls == r.progress.env_steps + r.progress.grad_steps);
    for (std::size_t e = 0; e < 6; ++e) {
        CHECK(r.progress.episode_reward[e] == -r.progress.episode_j[e]);
        CHECK(r.progress.episode_seed[e] == episode_seed(5, static_cast<int>(e)));
        CHECK(r.progress.episode_epsilon[e] == epsilon_at(h, 10 * (e + 1)));
    }
    const auto csv = learning_curve_csv(r.progress);
    CHECK(csv.rfind("episode,cumulative_reward,epsilon", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("no gradient step while the buffer is smaller than a batch") {
    auto h = tiny_hyper();
    h.batch = 61;
    const auto r = train(tiny_world(), h, 5);
    CHECK(r.progress.grad_steps == 0);
    CHECK(r.target_forward_calls == 0);
}

TEST_CASE("training is reproducible and resumable") {
    const auto h = tiny_hyper();
    const auto a = train(tiny_world(), h, 9);
    const auto b = train(tiny_world(), h, 9);
    CHECK(a.net.to_json() == b.net.to_json());
    CHECK(a.progress.episode_j == b.progress.episode_j);

    const Checkpoint ck{a.net, h, 9, a.progress};
    const auto round = Checkpoint::from_json(nlohmann::json::parse(ck.to_json().dump()));
    CHECK(round.net.to_json() == a.net.to_json());
    CHECK(round.progress.episode_j == a.progress.episode_j);
    CHECK(round.progress.env_steps == a.progress.env_steps);

    const auto c = train(tiny_world(), h, 9, &round);
    CHECK(c.progress.episodes_done == 12);
    CHECK(c.progress.episode_j.size() == 12);
    CHECK(std::equal(a.progress.episode_j.begin(), a.progress.episode_j.end(), c.progress.episode_j.begin()));
    CHECK(c.progress.episode_seed[8] == episode_seed(9, 8));
    CHECK(c.progress.env_steps == 120);
}

TEST_CASE("network serialization round-trips bit-exactly") {
    Rng rng(4);
    QNetwork n({6, 7, 5, 2}, rng);
    const auto m = QNetwork::from_json(nlohmann::json::parse(n.to_json().dump()));
    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(m.weights()[l] == n.weights()[l]);
        CHECK(m.biases()[l] == n.biases()[l]);
    }
    auto bad = n.to_json();
    bad["version"] = 2;
    CHECK_THROWS_AS(QNetwork::from_json(bad), ConfigError);
}

TEST_CASE("divergence aborts with the last finite checkpoint") {
    auto h = tiny_hyper();
    h.optimizer = Optimizer::sgd;
    h.lr = 1e200;
    bool thrown = false;
    try {
        train(tiny_world(), h, 2);
    } catch (const DivergenceError& e) {
        thrown = true;
        CHECK(e.last_finite().net.finite());
    }
    CHECK(thrown);
}

TEST_CASE("greedy policy only picks alive sensors") {
    world::WorldConfig c = tiny_world();
    c.battery_capacity_j = 0.05;
    Rng rng(1);
    DqnPolicy p(QNetwork({9, 4, 4, 3}, rng), StateMode::per_sensor);
    p.begin_episode(c);
    world::World w(c);
    w.exchange_frame(0);
    w.exchange_frame(2);
    const auto d = p.decide(w.observe());
    CHECK(d.action.sensor_id == 1);
}

TEST_CASE("hyperparameter validation") {
    DqnHyper h;
    h.eps_min = 2.0;
    CHECK_THROWS_AS(h.validate(), ConfigError);
    h = {};
    h.batch = 0;
    CHECK_THROWS_AS(h.validate(), ConfigError);
}
