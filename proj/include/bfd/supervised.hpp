#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bfd/errors.hpp"
#include "bfd/example.hpp"
#include "bfd/nn.hpp"
#include "bfd/rl.hpp"
#include "bfd/rng.hpp"

namespace bfd {

enum class LossKind { CrossEntropy, ExpectedReward };

struct TrainConfig {
    HyperParams hp;
    LossKind loss_kind = LossKind::CrossEntropy;
    std::optional<RewardMatrix> reward_matrix;  // required for ExpectedReward
    // Optional per-class weights on the cross-entropy head; unit weights
    // reproduce the unweighted loss exactly.
    std::array<double, kNumClasses> class_weights = {1.0, 1.0, 1.0};

    void validate(std::size_t dataset_size) const {
        hp.validate();
        if (loss_kind == LossKind::ExpectedReward && !reward_matrix) {
            throw InvalidParam("expected_reward loss requires a reward matrix");
        }
        if (static_cast<std::size_t>(hp.batch_size) > dataset_size) {
            throw InvalidParam("batch_size exceeds dataset size");
        }
    }
};

// Negative expected reward under the predicted class distribution:
//   L = -sum_a softmax(logits)_a * R[actual][a]
// Returns the loss and its gradient with respect to the logits.
inline std::pair<double, Eigen::VectorXd> expected_reward_loss(const Eigen::VectorXd& logits,
                                                               FaultClass actual,
                                                               const RewardMatrix& matrix) {
    const Eigen::VectorXd p = softmax(logits);
    const int a = class_index(actual);
    double expected = 0.0;
    for (int k = 0; k < kNumClasses; ++k) expected += p(k) * matrix.r[a][k];
    Eigen::VectorXd grad(kNumClasses);
    for (int k = 0; k < kNumClasses; ++k) grad(k) = -p(k) * (matrix.r[a][k] - expected);
    return {-expected, grad};
}

struct AnnResult {
    Mlp net;
    std::vector<double> epoch_losses;  // mean loss per epoch
};

// Plain minibatch training: seeded shuffle per epoch, batches of
// hp.batch_size with the final short batch kept.
inline AnnResult train_ann(const std::vector<Example>& train, const TrainConfig& cfg,
                           std::uint64_t seed) {
    if (train.empty()) throw InvalidParam("training set is empty");
    cfg.validate(train.size());
    const auto nf = static_cast<int>(train.front().features.size());
    AnnResult result;
    result.net = init_mlp(nf, kNumClasses, seed);
    AdamState adam = make_adam_state(result.net);
    Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.hp.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(cfg.hp.batch_size)) {
            const std::size_t end =
                std::min(begin + static_cast<std::size_t>(cfg.hp.batch_size), order.size());
            const auto n = static_cast<Eigen::Index>(end - begin);
            Eigen::MatrixXd inputs(n, nf);
            for (Eigen::Index i = 0; i < n; ++i) {
                inputs.row(i) = train[order[begin + static_cast<std::size_t>(i)]].features.transpose();
            }
            const ForwardCache cache = forward_batch(result.net, inputs);
            Eigen::MatrixXd output_grads(n, kNumClasses);
            double batch_loss = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const FaultClass label = train[order[begin + static_cast<std::size_t>(i)]].label;
                const Eigen::VectorXd logits = cache.logits.row(i).transpose();
                if (cfg.loss_kind == LossKind::CrossEntropy) {
                    auto [loss, grad] = softmax_cross_entropy(logits, class_index(label),
                                                              cfg.class_weights[class_index(label)]);
                    batch_loss += loss;
                    output_grads.row(i) = grad.transpose();
                } else {
                    auto [loss, grad] = expected_reward_loss(logits, label, *cfg.reward_matrix);
                    batch_loss += loss;
                    output_grads.row(i) = grad.transpose();
                }
            }
            epoch_loss += batch_loss;
            const Gradients g = backward(result.net, inputs, cache, output_grads);
            adam_step(result.net, g, adam, cfg.hp.learning_rate, cfg.hp.adam_beta1,
                      cfg.hp.adam_beta2, cfg.hp.adam_eps);
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(train.size()));
    }
    return result;
}

// Argmax predictions in input order; pure.
inline std::vector<FaultClass> evaluate_model(const Mlp& net, const std::vector<Example>& test) {
    if (test.empty()) throw InvalidParam("test set is empty");
    std::vector<FaultClass> out;
    out.reserve(test.size());
    for (const auto& e : test) out.push_back(predict(net, e.features));
    return out;
}

inline void write_loss_csv(const std::string& path, const std::vector<double>& epoch_losses) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "epoch,mean_loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < epoch_losses.size(); ++i) {
        out << (i + 1) << ',' << epoch_losses[i] << '\n';
    }
}

}  // namespace bfd
