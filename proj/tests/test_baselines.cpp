#include <doctest.h>

#include <map>
#include <set>

#include "uavicl/baselines.hpp"
#include "uavicl/episode.hpp"
#include "uavicl/errors.hpp"

using namespace uavicl;
using namespace uavicl::policy;
using world::Observation;
using world::SensorObs;

namespace {

Observation obs_of(std::vector<SensorObs> s) {
    Observation o;
    o.gamma_th_db = -80.0;
    o.buffer_depth = 40;
    o.battery_capacity_j = 50.0;
    o.tx_energy_j = 0.1;
    o.n_sensors = static_cast<int>(s.size());
    o.sensors = std::move(s);
    return o;
}

SensorObs sensor(int id, int q, double gain, double dist = 10.0, double bat = 50.0) {
    SensorObs s;
    s.id = id;
    s.queue = q;
    s.gain_db = gain;
    s.distance_to_uav = dist;
    s.battery_j = bat;
    return s;
}

Observation random_obs(Rng& rng, int n) {
    std::vector<SensorObs> v;
    for (int i = 0; i < n; ++i)
        v.push_back(sensor(i, static_cast<int>(rng.below(41)), -100.0 + 40.0 * rng.uniform01(),
                           rng.uniform(0, 141.5), rng.uniform(0, 50)));
    // occasional exact ties
    if (n > 2 && rng.bernoulli(0.3)) {
        v[1].gain_db = v[0].gain_db;
        v[2].queue = v[0].queue;
    }
    return obs_of(v);
}

// Cumulative J of one schedule on a freshly constructed world.
int replay_j(const world::WorldConfig& cfg, const std::vector<int>& schedule) {
    world::World w(cfg);
    int j = 0;
    for (int id : schedule) j += w.step({id}).objective_increment;
    return j;
}

}  // namespace

TEST_CASE("max gain examples") {
    CHECK(select_max_gain(obs_of({sensor(0, 0, -70), sensor(1, 0, -60), sensor(2, 0, -80)})).sensor_id == 1);
    CHECK(select_max_gain(obs_of({sensor(0, 0, -60), sensor(1, 0, -70), sensor(2, 0, -60)})).sensor_id == 0);
    CHECK(select_max_gain(obs_of({sensor(4, 3, -90)})).sensor_id == 4);
    CHECK_THROWS_AS(select_max_gain(obs_of({})), RuntimeFault);
}

TEST_CASE("max gain is invariant to a uniform gain shift") {
    Rng rng(101);
    for (int i = 0; i < 1000; ++i) {
        auto o = random_obs(rng, 1 + static_cast<int>(rng.below(10)));
        const int a = select_max_gain(o).sensor_id;
        const double shift = rng.uniform(-50, 50);
        for (auto& s : o.sensors) s.gain_db += shift;
        CHECK(select_max_gain(o).sensor_id == a);
    }
}

TEST_CASE("mqns examples") {
    CHECK(select_mqns(obs_of({sensor(0, 5, -70, 5), sensor(1, 30, -70, 6), sensor(2, 12, -70, 7)}), 30).sensor_id == 1);
    CHECK(select_mqns(obs_of({sensor(0, 5, -70, 10), sensor(1, 30, -70, 50)}), 30).sensor_id == 0);
    const auto fb = select_mqns(obs_of({sensor(0, 5, -70, 60), sensor(1, 30, -70, 45)}), 30);
    CHECK(fb.sensor_id == 1);
    CHECK(fb.provenance == world::Provenance::baseline);
    CHECK_THROWS_AS(MqnsPolicy(0.0), ConfigError);
}

TEST_CASE("mqns with radius >= field diagonal is the global max-queue choice") {
    Rng rng(202);
    for (int i = 0; i < 1000; ++i) {
        const auto o = random_obs(rng, 1 + static_cast<int>(rng.below(10)));
        int best = o.sensors.front().id, bq = o.sensors.front().queue;
        for (const auto& s : o.sensors)
            if (s.queue > bq) best = s.id, bq = s.queue;
        CHECK(select_mqns(o, 100.0 * std::sqrt(2.0)).sensor_id == best);
    }
}

TEST_CASE("random safe") {
    Rng a(5), b(5);
    const auto o = obs_of({sensor(0, 1, -70), sensor(1, 2, -75), sensor(2, 3, -79)});
    for (int i = 0; i < 50; ++i) {
        const auto x = select_random_safe(o, a);
        CHECK(x.sensor_id == select_random_safe(o, b).sensor_id);
        CHECK(x.provenance == world::Provenance::random_safe);
    }

    Rng r(9);
    const auto one = obs_of({sensor(0, 1, -70, 10, 0.05), sensor(1, 2, -70), sensor(2, 3, -70, 10, 0.01)});
    for (int i = 0; i < 100; ++i) CHECK(select_random_safe(one, r).sensor_id == 1);

    const auto none = obs_of({sensor(3, 1, -70, 10, 0.05), sensor(7, 2, -70, 10, 0.02)});
    std::set<int> seen;
    for (int i = 0; i < 200; ++i) seen.insert(select_random_safe(none, r).sensor_id);
    CHECK(seen == std::set<int>{3, 7});

    // above-threshold feasible sensors are preferred when present
    const auto tiers = obs_of({sensor(0, 1, -90), sensor(1, 2, -70), sensor(2, 3, -95)});
    for (int i = 0; i < 100; ++i) CHECK(select_random_safe(tiers, r).sensor_id == 1);
}

TEST_CASE("uniform selector covers alive sensors evenly") {
    Rng r(33);
    const auto o = obs_of({sensor(0, 0, -70), sensor(2, 0, -90), sensor(5, 0, -99, 1, 0.0)});
    std::map<int, int> n;
    for (int i = 0; i < 30000; ++i) ++n[select_uniform(o, r).sensor_id];
    CHECK(n.size() == 3);
    for (auto [id, c] : n) CHECK(std::abs(c - 10000) < 400);
}

TEST_CASE("oracle: hand-checked 2x2 tree") {
    // D=1, empty queues, one packet per step. A has the better gain and passes
    // the threshold, B fails. Leaves: AA=1 (B overflows at t=1), AB=2, BA=2, BB=3.
    world::WorldConfig cfg;
    cfg.n_sensors = 2;
    cfg.time_steps = 2;
    cfg.buffer_depth = 1;
    cfg.initial_queue = world::InitialQueue::empty;
    cfg.trajectory = {{50, 50, 100}};
    cfg.seed = 3;
    const world::World probe(cfg);
    const auto o = probe.observe();
    const int A = o.sensors[0].gain_db > o.sensors[1].gain_db ? 0 : 1;
    const int B = 1 - A;
    cfg.gamma_th_db = (o.sensors[0].gain_db + o.sensors[1].gain_db) / 2.0;

    CHECK(replay_j(cfg, {A, A}) == 1);
    CHECK(replay_j(cfg, {A, B}) == 2);
    CHECK(replay_j(cfg, {B, A}) == 2);
    CHECK(replay_j(cfg, {B, B}) == 3);
    const auto r = brute_force_schedule(cfg);
    CHECK(r.j_star == 1);
    CHECK(r.schedule == std::vector<int>{A, A});
}

TEST_CASE("oracle: N=1 repeats the single sensor") {
    world::WorldConfig cfg;
    cfg.n_sensors = 1;
    cfg.time_steps = 4;
    cfg.gamma_th_db = 1e9;
    const auto r = brute_force_schedule(cfg);
    CHECK(r.schedule == std::vector<int>{0, 0, 0, 0});
    CHECK(r.j_star == 4);
    cfg.gamma_th_db = -1e9;
    CHECK(brute_force_schedule(cfg).j_star == 0);
}

TEST_CASE("oracle agrees with plain enumeration and bounds every policy") {
    Rng rng(404);
    for (int inst = 0; inst < 25; ++inst) {
        world::WorldConfig cfg;
        cfg.n_sensors = 1 + static_cast<int>(rng.below(3));
        cfg.time_steps = 1 + static_cast<int>(rng.below(4));
        cfg.buffer_depth = 1 + static_cast<int>(rng.below(5));
        cfg.seed = rng.next_u64();
        const auto r = brute_force_schedule(cfg);

        int count = 1;
        for (int t = 0; t < cfg.time_steps; ++t) count *= cfg.n_sensors;
        int best = 1 << 30;
        std::vector<int> best_s;
        for (int code = 0; code < count; ++code) {
            std::vector<int> s;
            int c = code;
            for (int t = 0; t < cfg.time_steps; ++t) {
                s.insert(s.begin(), c % cfg.n_sensors);
                c /= cfg.n_sensors;
            }
            const int j = replay_j(cfg, s);
            if (j < best) best = j, best_s = s;
        }
        CHECK(r.j_star == best);
        CHECK(r.schedule == best_s);

        MaxGainPolicy mg;
        MqnsPolicy mq;
        RandomSafePolicy rs;
        CHECK(sim::run_episode(cfg, mg).cumulative_j >= r.j_star);
        CHECK(sim::run_episode(cfg, mq).cumulative_j >= r.j_star);
        CHECK(sim::run_episode(cfg, rs).cumulative_j >= r.j_star);
        FixedSchedulePolicy fx(r.schedule);
        CHECK(sim::run_episode(cfg, fx).cumulative_j == r.j_star);
    }
}

TEST_CASE("oracle refuses large instances") {
    world::WorldConfig cfg;
    cfg.n_sensors = 6;
    cfg.time_steps = 3;
    CHECK_THROWS_AS(brute_force_schedule(cfg), ConfigError);
    cfg.n_sensors = 3;
    cfg.time_steps = 8;
    CHECK_THROWS_AS(brute_force_schedule(cfg), ConfigError);
}
