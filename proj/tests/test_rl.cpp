#include <catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "bfd/rl.hpp"
#include "bfd/signal.hpp"
#include "oracles.hpp"

using namespace bfd;
using Catch::Approx;

namespace {

// A trivially separable 3-class feature set: class means far apart.
std::vector<Example> separable_examples(std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Example> out;
    const double centers[3][2] = {{-4.0, 0.0}, {4.0, 0.0}, {0.0, 4.0}};
    for (int c = 0; c < kNumClasses; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Eigen::VectorXd x(2);
            x << centers[c][0] + rng.normal(0, 0.5), centers[c][1] + rng.normal(0, 0.5);
            out.push_back({x, class_from_index(c)});
        }
    }
    rng.shuffle(out);
    return out;
}

double accuracy(const Mlp& net, const std::vector<Example>& data) {
    int correct = 0;
    for (const auto& e : data) {
        if (predict(net, e.features) == e.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("shaped reward matrix entries") {
    const auto m = shaped_reward_matrix();
    CHECK(reward_lookup(m, FaultClass::Faulty, FaultClass::DevelopingFault) == -1.2);
    CHECK(reward_lookup(m, FaultClass::Healthy, FaultClass::Healthy) == 1.0);
    CHECK(reward_lookup(m, FaultClass::Healthy, FaultClass::Faulty) == -0.5);
    CHECK(reward_lookup(m, FaultClass::DevelopingFault, FaultClass::Faulty) == -1.2);
    CHECK(reward_lookup(m, FaultClass::DevelopingFault, FaultClass::Healthy) == -1.0);
    m.validate();
}

TEST_CASE("default reward matrix") {
    const auto m = default_reward_matrix();
    CHECK(m.lookup(FaultClass::Healthy, FaultClass::Healthy) == 1.0);
    CHECK(m.lookup(FaultClass::Faulty, FaultClass::Healthy) == -1.0);
    for (int a = 0; a < kNumClasses; ++a) {
        for (int p = 0; p < kNumClasses; ++p) {
            if (p != a) CHECK(m.r[a][a] > m.r[a][p]);
        }
    }
}

TEST_CASE("reward matrix CSV loading") {
    const auto dir = std::filesystem::temp_directory_path() / "bfd_rl_tests";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "rewards.csv").string();
    std::ofstream(path) << "1,-1.2,-1\n-1.2,1,-0.5\n-1,-0.5,1\n";
    const auto m = load_reward_matrix(path);
    CHECK(m.lookup(FaultClass::Faulty, FaultClass::Healthy) == -0.5);

    const auto bad = (dir / "bad.csv").string();
    std::ofstream(bad) << "1,1,1\n1,1,1\n1,1,1\n";  // no diagonal dominance
    CHECK_THROWS_AS(load_reward_matrix(bad), InvalidParam);
}

TEST_CASE("single-example environment terminates after one step") {
    std::vector<Example> one = {{Eigen::Vector2d(0.0, 0.0), FaultClass::Healthy}};
    ClassificationEnv env(one, default_reward_matrix(), 0);
    env.reset();
    const auto r = env.step(class_index(FaultClass::Healthy));
    CHECK(r.done);
    CHECK(r.reward == 1.0);
    CHECK(!r.next_state.has_value());
    CHECK_THROWS_AS(env.step(0), StepAfterDone);
}

TEST_CASE("perfect play over a 60-example episode pays 60") {
    auto examples = separable_examples(20, 1);
    ClassificationEnv env(examples, shaped_reward_matrix(), 3);
    env.reset();
    double total = 0;
    bool done = false;
    while (!done) {
        const auto r = env.step(class_index(env.current_label()));
        total += r.reward;
        done = r.done;
    }
    CHECK(total == 60.0);
}

TEST_CASE("all-Faulty policy on a pure DevelopingFault episode") {
    std::vector<Example> examples;
    for (int i = 0; i < 10; ++i) {
        examples.push_back({Eigen::Vector2d(static_cast<double>(i), 0.0),
                            FaultClass::DevelopingFault});
    }
    ClassificationEnv env(examples, shaped_reward_matrix(), 0);
    env.reset();
    double total = 0;
    bool done = false;
    while (!done) {
        const auto r = env.step(class_index(FaultClass::Faulty));
        total += r.reward;
        done = r.done;
    }
    CHECK(total == Approx(-12.0).margin(1e-12));
}

TEST_CASE("environment reshuffles across episodes but stays seeded") {
    auto examples = separable_examples(10, 5);
    auto episode_labels = [](ClassificationEnv& env) {
        std::vector<int> labels;
        env.reset();
        bool done = false;
        while (!done) {
            labels.push_back(class_index(env.current_label()));
            done = env.step(0).done;
        }
        return labels;
    };
    ClassificationEnv a(examples, default_reward_matrix(), 9);
    ClassificationEnv b(examples, default_reward_matrix(), 9);
    const auto a1 = episode_labels(a);
    const auto a2 = episode_labels(a);
    CHECK(episode_labels(b) == a1);
    CHECK(episode_labels(b) == a2);
    CHECK(a1 != a2);  // different permutation with near certainty at n=30
}

TEST_CASE("epsilon schedule invariants") {
    const EpsilonSchedule s{1.0, 0.995, 0.01};
    double prev = s.value(0);
    CHECK(prev == 1.0);
    for (int k = 1; k <= 1200; ++k) {
        const double e = s.value(k);
        CHECK(e <= prev);
        CHECK(e >= 0.01);
        prev = e;
    }
    // first k where 0.995^k < 0.01 is ceil(ln 0.01 / ln 0.995) = 919
    CHECK(s.value(918) > 0.01);
    CHECK(std::pow(0.995, 918) > 0.01);
    CHECK(std::pow(0.995, 919) < 0.01);
    CHECK(s.value(919) == 0.01);
}

TEST_CASE("epsilon-greedy action selection") {
    const auto net = init_mlp(2, 3, 7);
    Rng rng(4);
    Eigen::VectorXd state(2);
    state << 0.3, -0.2;
    const int greedy = argmax_lowest_tie(forward(net, state));
    for (int i = 0; i < 50; ++i) CHECK(select_action(net, state, 0.0, rng) == greedy);

    // epsilon = 1: frequencies uniform within 3 sigma over 30,000 draws
    int counts[3] = {0, 0, 0};
    const int n = 30000;
    for (int i = 0; i < n; ++i) counts[select_action(net, state, 1.0, rng)] += 1;
    const double p = 1.0 / 3.0;
    const double sigma = std::sqrt(n * p * (1 - p));
    for (int c = 0; c < 3; ++c) CHECK(std::fabs(counts[c] - n * p) < 3 * sigma);

    // reproducible given rng state
    Rng r1(99), r2(99);
    for (int i = 0; i < 100; ++i) {
        CHECK(select_action(net, state, 0.5, r1) == select_action(net, state, 0.5, r2));
    }
    CHECK_THROWS_AS(select_action(net, state, 1.5, rng), InvalidParam);
}

TEST_CASE("replay buffer FIFO eviction") {
    ReplayBuffer buf(3);
    auto push = [&buf](double tag) {
        Transition t;
        t.state = Eigen::VectorXd::Constant(1, tag);
        t.done = true;
        buf.push(t);
    };
    push(1);
    push(2);
    push(3);
    push(4);
    REQUIRE(buf.size() == 3);
    CHECK(buf.at(0).state(0) == 2.0);
    CHECK(buf.at(1).state(0) == 3.0);
    CHECK(buf.at(2).state(0) == 4.0);
}

TEST_CASE("replay buffer FIFO property over random push sequences") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t capacity = 1 + rng.below(20);
        const std::size_t pushes = rng.below(60);
        ReplayBuffer buf(capacity);
        std::vector<double> tags;
        for (std::size_t i = 0; i < pushes; ++i) {
            const double tag = static_cast<double>(i);
            Transition t;
            t.state = Eigen::VectorXd::Constant(1, tag);
            t.done = true;
            buf.push(t);
            tags.push_back(tag);
        }
        const std::size_t expect = std::min(pushes, capacity);
        REQUIRE(buf.size() == expect);
        for (std::size_t i = 0; i < expect; ++i) {
            CHECK(buf.at(i).state(0) == tags[pushes - expect + i]);
        }
    }
}

TEST_CASE("replay sampling is uniform and without replacement") {
    ReplayBuffer buf(10);
    for (int i = 0; i < 10; ++i) {
        Transition t;
        t.state = Eigen::VectorXd::Constant(1, static_cast<double>(i));
        t.done = true;
        buf.push(t);
    }
    Rng rng(6);

    // batch == size -> a permutation of the whole buffer
    const auto all = buf.sample(10, rng);
    std::set<double> seen;
    for (const auto* t : all) seen.insert(t->state(0));
    CHECK(seen.size() == 10);

    int counts[10] = {};
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        counts[static_cast<int>(buf.sample(1, rng)[0]->state(0))] += 1;
    }
    const double p = 0.1;
    const double sigma = std::sqrt(n * p * (1 - p));
    for (int c = 0; c < 10; ++c) CHECK(std::fabs(counts[c] - n * p) < 3 * sigma);

    CHECK_THROWS_AS(buf.sample(11, rng), NotEnoughExperience);
}

TEST_CASE("q_target formula") {
    Eigen::VectorXd next(3);
    next << 0.5, 2.0, -1.0;
    CHECK(q_target(1.0, next, 0.99) == Approx(2.98));
    CHECK(q_target(-1.2, std::nullopt, 0.99) == -1.2);
    CHECK(q_target(0.7, next, 0.0) == 0.7);
    CHECK_THROWS_AS(q_target(0.0, next, 1.5), InvalidParam);
}

TEST_CASE("epoch DQN learns a separable problem") {
    auto train = separable_examples(160, 21);
    auto test = separable_examples(40, 22);
    // Certify the task first with an independent linear oracle.
    oracle::SoftmaxRegression probe;
    probe.fit(train);
    REQUIRE(probe.accuracy(test) >= 0.95);

    HyperParams hp;
    hp.epochs = 50;
    const auto res = dqn_train_epoch(train, hp, default_reward_matrix(), 3);
    CHECK(res.episodes.size() == 50);
    for (std::size_t i = 0; i < res.episodes.size(); ++i) {
        CHECK(res.episodes[i].episode == static_cast<int>(i) + 1);
    }
    CHECK(accuracy(res.net, test) >= 0.90);
}

TEST_CASE("epoch DQN reward log matches the step trace") {
    auto train = separable_examples(30, 33);
    HyperParams hp;
    hp.epochs = 5;
    DqnOptions opts;
    opts.record_steps = true;
    const auto m = shaped_reward_matrix();
    const auto res = dqn_train_epoch(train, hp, m, 17, opts);
    REQUIRE(res.episodes.size() == 5);
    std::vector<double> sums(6, 0.0);
    for (const auto& s : res.steps) {
        CHECK(s.reward == m.lookup(s.actual, class_from_index(s.action)));
        sums[static_cast<std::size_t>(s.episode)] += s.reward;
    }
    for (const auto& ep : res.episodes) {
        CHECK(std::fabs(ep.cumulative_reward - sums[static_cast<std::size_t>(ep.episode)]) <=
              1e-12);
    }
}

TEST_CASE("timestep DQN episode accounting") {
    auto train = separable_examples(20, 44);  // 60 examples
    HyperParams hp;

    // total_timesteps == dataset size -> exactly one logged episode
    auto res = dqn_train_timestep(train, hp, default_reward_matrix(), train.size(), 5);
    CHECK(res.episodes.size() == 1);

    // partial final episode is not logged
    res = dqn_train_timestep(train, hp, default_reward_matrix(), 150, 5);
    CHECK(res.episodes.size() == 2);  // floor(150 / 60)

    // epsilon decays once per completed episode
    CHECK(res.episodes[0].epsilon == 1.0);
    CHECK(res.episodes[1].epsilon == Approx(0.995));
}

TEST_CASE("timestep DQN is deterministic") {
    auto train = separable_examples(15, 2);
    HyperParams hp;
    const auto a = dqn_train_timestep(train, hp, default_reward_matrix(), 200, 7);
    const auto b = dqn_train_timestep(train, hp, default_reward_matrix(), 200, 7);
    CHECK((a.net.w1.array() == b.net.w1.array()).all());
    CHECK((a.net.w3.array() == b.net.w3.array()).all());
    REQUIRE(a.episodes.size() == b.episodes.size());
    for (std::size_t i = 0; i < a.episodes.size(); ++i) {
        CHECK(a.episodes[i].cumulative_reward == b.episodes[i].cumulative_reward);
    }
}

TEST_CASE("target network option still trains") {
    auto train = separable_examples(60, 8);
    HyperParams hp;
    hp.epochs = 30;
    DqnOptions opts;
    opts.target_sync_interval = 50;
    const auto res = dqn_train_epoch(train, hp, default_reward_matrix(), 11, opts);
    CHECK(accuracy(res.net, train) >= 0.85);
}

TEST_CASE("random policy scores chance on a balanced set") {
    Rng rng(123);
    int correct = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const int label = static_cast<int>(i) % 3;
        if (static_cast<int>(rng.below(3)) == label) ++correct;
    }
    const double acc = static_cast<double>(correct) / n;
    CHECK(acc > 1.0 / 3 - 0.03);
    CHECK(acc < 1.0 / 3 + 0.03);
}
