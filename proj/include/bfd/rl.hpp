#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bfd/errors.hpp"
#include "bfd/example.hpp"
#include "bfd/fault_class.hpp"
#include "bfd/nn.hpp"
#include "bfd/rng.hpp"

namespace bfd {

// 3x3 payoff table indexed [actual][predicted] in canonical class order.
// Every row must pay best on the diagonal, so greedy play under a perfectly
// learned Q is correct classification.
struct RewardMatrix {
    double r[kNumClasses][kNumClasses];

    double lookup(FaultClass actual, FaultClass predicted) const {
        return r[class_index(actual)][class_index(predicted)];
    }

    void validate() const {
        for (int a = 0; a < kNumClasses; ++a) {
            for (int p = 0; p < kNumClasses; ++p) {
                if (p != a && !(r[a][a] > r[a][p])) {
                    throw InvalidParam("reward matrix row " + std::to_string(a) +
                                       " is not diagonal-dominant");
                }
            }
        }
    }
};

// +1 for a correct call, -1 otherwise.
inline RewardMatrix default_reward_matrix() {
    RewardMatrix m{};
    for (int a = 0; a < kNumClasses; ++a) {
        for (int p = 0; p < kNumClasses; ++p) m.r[a][p] = (a == p) ? 1.0 : -1.0;
    }
    return m;
}

// Asymmetric penalties: confusing the two fault classes with each other is
// punished hardest, mixing either with healthy less so.
inline RewardMatrix shaped_reward_matrix() {
    RewardMatrix m{};
    // rows/cols: developing_fault, faulty, healthy
    m.r[0][0] = 1.0;  m.r[0][1] = -1.2; m.r[0][2] = -1.0;
    m.r[1][0] = -1.2; m.r[1][1] = 1.0;  m.r[1][2] = -0.5;
    m.r[2][0] = -1.0; m.r[2][1] = -0.5; m.r[2][2] = 1.0;
    return m;
}

// 3-line CSV, rows in canonical class order.
inline RewardMatrix load_reward_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path);
    RewardMatrix m{};
    std::string line;
    int row = 0;
    while (std::getline(in, line) && row < kNumClasses) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        for (int col = 0; col < kNumClasses; ++col) {
            double v = 0;
            auto [ptr, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{}) throw ParseError(path + ": bad reward row " + line);
            m.r[row][col] = v;
            p = ptr;
            if (col < kNumClasses - 1) {
                if (p == end || *p != ',') throw ParseError(path + ": expected 3 columns: " + line);
                ++p;
            }
        }
        ++row;
    }
    if (row != kNumClasses) throw ParseError(path + ": expected 3 reward rows");
    m.validate();
    return m;
}

inline double reward_lookup(const RewardMatrix& matrix, FaultClass actual, FaultClass predicted) {
    return matrix.lookup(actual, predicted);
}

struct Transition {
    Eigen::VectorXd state;
    int action = 0;
    double reward = 0.0;
    Eigen::VectorXd next_state;  // empty when terminal
    bool done = false;
};

// Bounded FIFO of transitions backed by a ring.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {
        if (capacity_ < 1) throw InvalidParam("replay capacity must be >= 1");
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }

    void push(Transition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    // Oldest first.
    const Transition& at(std::size_t i) const {
        return items_[(head_ + i) % items_.size()];
    }

    // Uniform without replacement within a batch.
    std::vector<const Transition*> sample(std::size_t batch_size, Rng& rng) const {
        if (items_.size() < batch_size) throw NotEnoughExperience(items_.size(), batch_size);
        std::vector<std::size_t> idx(items_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        // partial Fisher-Yates: first batch_size slots are the draw
        for (std::size_t i = 0; i < batch_size; ++i) {
            std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
        }
        std::vector<const Transition*> out(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) out[i] = &items_[idx[i]];
        return out;
    }

  private:
    std::vector<Transition> items_;
    std::size_t capacity_;
    std::size_t head_ = 0;
};

struct EpsilonSchedule {
    double start = 1.0;
    double decay = 0.995;
    double floor = 0.01;

    // Value after k multiplicative decays, clamped at the floor.
    double value(int k) const {
        double e = start;
        for (int i = 0; i < k; ++i) e *= decay;
        return std::max(e, floor);
    }
};

// One episode = one seeded-shuffled pass over the example set. The reward for
// an action is the payoff against the current example's true label; the next
// state is the next example in the permutation.
class ClassificationEnv {
  public:
    ClassificationEnv(std::vector<Example> examples, RewardMatrix matrix, std::uint64_t seed)
        : examples_(std::move(examples)), matrix_(matrix), rng_(seed) {
        if (examples_.empty()) throw InvalidParam("environment needs at least one example");
        perm_.resize(examples_.size());
        for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
    }

    std::size_t episode_length() const { return examples_.size(); }

    const Eigen::VectorXd& reset() {
        rng_.shuffle(perm_);
        cursor_ = 0;
        done_ = false;
        return examples_[perm_[0]].features;
    }

    struct StepResult {
        double reward;
        std::optional<Eigen::VectorXd> next_state;  // empty when terminal
        bool done;
    };

    FaultClass current_label() const { return examples_[perm_[cursor_]].label; }

    StepResult step(int action) {
        if (done_) throw StepAfterDone("step() called on a finished episode");
        const FaultClass actual = examples_[perm_[cursor_]].label;
        StepResult r;
        r.reward = matrix_.lookup(actual, class_from_index(action));
        ++cursor_;
        done_ = cursor_ == examples_.size();
        r.done = done_;
        if (!done_) r.next_state = examples_[perm_[cursor_]].features;
        return r;
    }

  private:
    std::vector<Example> examples_;
    RewardMatrix matrix_;
    Rng rng_;
    std::vector<std::size_t> perm_;
    std::size_t cursor_ = 0;
    bool done_ = true;
};

// Epsilon-greedy over the network's Q-values.
inline int select_action(const Mlp& net, const Eigen::VectorXd& state, double epsilon, Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) throw InvalidParam("epsilon must be in [0, 1]");
    if (rng.uniform() < epsilon) return static_cast<int>(rng.below(kNumClasses));
    return argmax_lowest_tie(forward(net, state));
}

inline double q_target(double reward, const std::optional<Eigen::VectorXd>& next_q, double gamma) {
    if (gamma < 0.0 || gamma > 1.0) throw InvalidParam("gamma must be in [0, 1]");
    if (!next_q) return reward;
    return reward + gamma * next_q->maxCoeff();
}

struct DqnOptions {
    std::size_t buffer_capacity = 10000;
    int target_sync_interval = 0;  // gradient steps between target syncs; 0 = no target net
    bool record_steps = false;     // keep the per-step (actual, action) trace
};

struct EpisodePoint {
    int episode;  // 1-based
    double cumulative_reward;
    double epsilon;  // value in effect during the episode
};

struct StepRecord {
    int episode;
    FaultClass actual;
    int action;
    double reward;
};

struct DqnResult {
    Mlp net;
    std::vector<EpisodePoint> episodes;
    std::vector<StepRecord> steps;  // only when record_steps
};

namespace detail {

struct DqnLoop {
    const HyperParams& hp;
    DqnOptions opts;
    Mlp net;
    Mlp target;
    AdamState adam;
    ReplayBuffer buffer;
    Rng rng;
    long grad_steps = 0;

    DqnLoop(int num_features, const HyperParams& hp_, const DqnOptions& opts_, std::uint64_t seed)
        : hp(hp_),
          opts(opts_),
          net(init_mlp(num_features, kNumClasses, seed)),
          adam(make_adam_state(net)),
          buffer(opts_.buffer_capacity),
          rng(seed ^ 0x9E3779B97F4A7C15ULL) {
        if (opts.target_sync_interval > 0) target = net;
    }

    const Mlp& bootstrap_net() const { return opts.target_sync_interval > 0 ? target : net; }

    void learn_step() {
        if (buffer.size() < static_cast<std::size_t>(hp.batch_size)) return;
        const auto batch = buffer.sample(static_cast<std::size_t>(hp.batch_size), rng);
        const auto n = static_cast<Eigen::Index>(batch.size());
        const Eigen::Index nf = batch[0]->state.size();
        Eigen::MatrixXd states(n, nf), next_states(n, nf);
        next_states.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            states.row(i) = batch[i]->state.transpose();
            if (!batch[i]->done) next_states.row(i) = batch[i]->next_state.transpose();
        }
        const Eigen::MatrixXd next_q = forward_batch(bootstrap_net(), next_states).logits;
        const ForwardCache cache = forward_batch(net, states);
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, kNumClasses);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Transition& t = *batch[i];
            const double tgt =
                t.done ? t.reward : t.reward + hp.discount_factor * next_q.row(i).maxCoeff();
            // squared error on the taken action's Q-value
            grad(i, t.action) = 2.0 * (cache.logits(i, t.action) - tgt);
        }
        const Gradients g = backward(net, states, cache, grad);
        adam_step(net, g, adam, hp.learning_rate, hp.adam_beta1, hp.adam_beta2, hp.adam_eps);
        ++grad_steps;
        if (opts.target_sync_interval > 0 && grad_steps % opts.target_sync_interval == 0) {
            target = net;
        }
    }
};

}  // namespace detail

// Epoch regime: each epoch is one full environment pass; epsilon decays once
// per episode; one gradient step per environment step once the buffer is warm.
inline DqnResult dqn_train_epoch(const std::vector<Example>& train, const HyperParams& hp,
                                 const RewardMatrix& matrix, std::uint64_t seed,
                                 const DqnOptions& opts = {}) {
    if (train.empty()) throw InvalidParam("training set is empty");
    hp.validate();
    matrix.validate();
    const auto nf = static_cast<int>(train.front().features.size());
    detail::DqnLoop loop(nf, hp, opts, seed);
    ClassificationEnv env(train, matrix, seed ^ 0xD1B54A32D192ED03ULL);
    const EpsilonSchedule sched{hp.epsilon_start, hp.epsilon_decay, hp.epsilon_min};

    DqnResult result;
    for (int ep = 0; ep < hp.epochs; ++ep) {
        const double epsilon = sched.value(ep);
        Eigen::VectorXd state = env.reset();
        double ep_reward = 0.0;
        bool done = false;
        while (!done) {
            const int action = select_action(loop.net, state, epsilon, loop.rng);
            const FaultClass actual = env.current_label();
            auto step = env.step(action);
            ep_reward += step.reward;
            Transition t{state, action, step.reward,
                         step.next_state ? *step.next_state : Eigen::VectorXd(), step.done};
            loop.buffer.push(std::move(t));
            if (opts.record_steps) {
                result.steps.push_back({ep + 1, actual, action, step.reward});
            }
            loop.learn_step();
            done = step.done;
            if (!done) state = *step.next_state;
        }
        result.episodes.push_back({ep + 1, ep_reward, epsilon});
    }
    result.net = std::move(loop.net);
    return result;
}

// Timestep regime: the outer loop counts environment interactions and stops
// at total_timesteps; the environment auto-resets between episodes and
// epsilon decays at each episode boundary. A trailing partial episode is not
// logged.
inline DqnResult dqn_train_timestep(const std::vector<Example>& train, const HyperParams& hp,
                                    const RewardMatrix& matrix, std::size_t total_timesteps,
                                    std::uint64_t seed, const DqnOptions& opts = {}) {
    if (train.empty()) throw InvalidParam("training set is empty");
    if (total_timesteps < 1) throw InvalidParam("total_timesteps must be >= 1");
    hp.validate();
    matrix.validate();
    const auto nf = static_cast<int>(train.front().features.size());
    detail::DqnLoop loop(nf, hp, opts, seed);
    ClassificationEnv env(train, matrix, seed ^ 0xD1B54A32D192ED03ULL);
    const EpsilonSchedule sched{hp.epsilon_start, hp.epsilon_decay, hp.epsilon_min};

    DqnResult result;
    int episodes_done = 0;
    std::size_t steps = 0;
    Eigen::VectorXd state = env.reset();
    double ep_reward = 0.0;
    double epsilon = sched.value(0);
    while (steps < total_timesteps) {
        const int action = select_action(loop.net, state, epsilon, loop.rng);
        const FaultClass actual = env.current_label();
        auto step = env.step(action);
        ++steps;
        ep_reward += step.reward;
        Transition t{state, action, step.reward,
                     step.next_state ? *step.next_state : Eigen::VectorXd(), step.done};
        loop.buffer.push(std::move(t));
        if (opts.record_steps) {
            result.steps.push_back({episodes_done + 1, actual, action, step.reward});
        }
        loop.learn_step();
        if (step.done) {
            ++episodes_done;
            result.episodes.push_back({episodes_done, ep_reward, epsilon});
            ep_reward = 0.0;
            epsilon = sched.value(episodes_done);
            state = env.reset();
        } else {
            state = *step.next_state;
        }
    }
    result.net = std::move(loop.net);
    return result;
}

inline void write_reward_curve_csv(const std::string& path,
                                   const std::vector<EpisodePoint>& episodes) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "episode,cumulative_reward,epsilon\n";
    out.precision(17);
    for (const auto& e : episodes) {
        out << e.episode << ',' << e.cumulative_reward << ',' << e.epsilon << '\n';
    }
}

}  // namespace bfd
