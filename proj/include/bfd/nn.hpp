#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "bfd/errors.hpp"
#include "bfd/fault_class.hpp"
#include "bfd/rng.hpp"

namespace bfd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kHiddenSize = 128;

// Three fully connected layers, ReLU between them. Shared by every model;
// the output head (softmax, Q-values) is applied by the caller.
struct Mlp {
    MatrixXd w1, w2, w3;  // (in x out)
    VectorXd b1, b2, b3;

    int num_features() const { return static_cast<int>(w1.rows()); }
    int num_actions() const { return static_cast<int>(w3.cols()); }
};

struct Gradients {
    MatrixXd w1, w2, w3;
    VectorXd b1, b2, b3;
};

struct AdamState {
    Gradients m;
    Gradients v;
    long t = 0;
};

struct HyperParams {
    int batch_size = 64;
    double learning_rate = 0.001;
    double discount_factor = 0.99;
    double epsilon_start = 1.0;
    double epsilon_decay = 0.995;
    double epsilon_min = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 50;

    void validate() const {
        if (batch_size < 1) throw InvalidParam("batch_size must be >= 1");
        if (learning_rate <= 0) throw InvalidParam("learning_rate must be > 0");
        if (discount_factor < 0 || discount_factor > 1) {
            throw InvalidParam("discount_factor must be in [0, 1]");
        }
        if (epsilon_decay <= 0 || epsilon_decay > 1) {
            throw InvalidParam("epsilon_decay must be in (0, 1]");
        }
        if (epochs < 0) throw InvalidParam("epochs must be >= 0");
    }
};

namespace detail {

inline void init_uniform(MatrixXd& w, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    }
}

}  // namespace detail

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
inline Mlp init_mlp(int num_features, int num_actions, std::uint64_t seed) {
    if (num_features < 1) throw InvalidParam("num_features must be >= 1");
    if (num_actions < 2) throw InvalidParam("num_actions must be >= 2");
    Rng rng(seed);
    Mlp net;
    net.w1.resize(num_features, kHiddenSize);
    net.w2.resize(kHiddenSize, kHiddenSize);
    net.w3.resize(kHiddenSize, num_actions);
    detail::init_uniform(net.w1, rng);
    detail::init_uniform(net.w2, rng);
    detail::init_uniform(net.w3, rng);
    net.b1 = VectorXd::Zero(kHiddenSize);
    net.b2 = VectorXd::Zero(kHiddenSize);
    net.b3 = VectorXd::Zero(num_actions);
    return net;
}

inline std::size_t parameter_count(const Mlp& net) {
    return static_cast<std::size_t>(net.w1.size() + net.b1.size() + net.w2.size() +
                                    net.b2.size() + net.w3.size() + net.b3.size());
}

// Activations kept for backprop. Rows are examples.
struct ForwardCache {
    MatrixXd h1;  // post-ReLU
    MatrixXd h2;
    MatrixXd logits;
};

inline ForwardCache forward_batch(const Mlp& net, const MatrixXd& inputs) {
    if (inputs.cols() != net.w1.rows()) {
        throw ShapeMismatch("input dim " + std::to_string(inputs.cols()) + " vs network dim " +
                            std::to_string(net.w1.rows()));
    }
    ForwardCache c;
    c.h1 = ((inputs * net.w1).rowwise() + net.b1.transpose()).cwiseMax(0.0);
    c.h2 = ((c.h1 * net.w2).rowwise() + net.b2.transpose()).cwiseMax(0.0);
    c.logits = (c.h2 * net.w3).rowwise() + net.b3.transpose();
    return c;
}

inline VectorXd forward(const Mlp& net, const VectorXd& input) {
    if (input.size() != net.w1.rows()) {
        throw ShapeMismatch("input dim " + std::to_string(input.size()) + " vs network dim " +
                            std::to_string(net.w1.rows()));
    }
    const VectorXd h1 = (net.w1.transpose() * input + net.b1).cwiseMax(0.0);
    const VectorXd h2 = (net.w2.transpose() * h1 + net.b2).cwiseMax(0.0);
    return net.w3.transpose() * h2 + net.b3;
}

// Gradient of the mean batch loss; `output_grads` holds per-example
// dLoss_i/dlogits_i rows. ReLU subgradient at 0 is 0.
inline Gradients backward(const Mlp& net, const MatrixXd& inputs, const ForwardCache& cache,
                          const MatrixXd& output_grads) {
    if (inputs.rows() == 0) throw InvalidParam("empty batch");
    if (output_grads.rows() != inputs.rows() || output_grads.cols() != net.w3.cols()) {
        throw ShapeMismatch("output gradient shape mismatch");
    }
    const double inv_n = 1.0 / static_cast<double>(inputs.rows());
    Gradients g;
    g.w3 = cache.h2.transpose() * output_grads * inv_n;
    g.b3 = output_grads.colwise().sum().transpose() * inv_n;

    MatrixXd d2 = output_grads * net.w3.transpose();
    d2 = d2.cwiseProduct((cache.h2.array() > 0.0).cast<double>().matrix());
    g.w2 = cache.h1.transpose() * d2 * inv_n;
    g.b2 = d2.colwise().sum().transpose() * inv_n;

    MatrixXd d1 = d2 * net.w2.transpose();
    d1 = d1.cwiseProduct((cache.h1.array() > 0.0).cast<double>().matrix());
    g.w1 = inputs.transpose() * d1 * inv_n;
    g.b1 = d1.colwise().sum().transpose() * inv_n;
    return g;
}

inline AdamState make_adam_state(const Mlp& net) {
    AdamState s;
    auto zeros_like = [](const Mlp& n) {
        Gradients g;
        g.w1 = MatrixXd::Zero(n.w1.rows(), n.w1.cols());
        g.w2 = MatrixXd::Zero(n.w2.rows(), n.w2.cols());
        g.w3 = MatrixXd::Zero(n.w3.rows(), n.w3.cols());
        g.b1 = VectorXd::Zero(n.b1.size());
        g.b2 = VectorXd::Zero(n.b2.size());
        g.b3 = VectorXd::Zero(n.b3.size());
        return g;
    };
    s.m = zeros_like(net);
    s.v = zeros_like(net);
    s.t = 0;
    return s;
}

namespace detail {

template <typename Mat>
void adam_update(Mat& param, const Mat& grad, Mat& m, Mat& v, double lr, double beta1,
                 double beta2, double eps, long t) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = (beta2 * v.array() + (1.0 - beta2) * grad.array().square()).matrix();
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace detail

inline void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    state.t += 1;
    detail::adam_update(net.w1, grads.w1, state.m.w1, state.v.w1, lr, beta1, beta2, eps, state.t);
    detail::adam_update(net.b1, grads.b1, state.m.b1, state.v.b1, lr, beta1, beta2, eps, state.t);
    detail::adam_update(net.w2, grads.w2, state.m.w2, state.v.w2, lr, beta1, beta2, eps, state.t);
    detail::adam_update(net.b2, grads.b2, state.m.b2, state.v.b2, lr, beta1, beta2, eps, state.t);
    detail::adam_update(net.w3, grads.w3, state.m.w3, state.v.w3, lr, beta1, beta2, eps, state.t);
    detail::adam_update(net.b3, grads.b3, state.m.b3, state.v.b3, lr, beta1, beta2, eps, state.t);
}

// Max-shifted softmax.
inline VectorXd softmax(const VectorXd& logits) {
    const double mx = logits.maxCoeff();
    VectorXd e = (logits.array() - mx).exp();
    return e / e.sum();
}

inline constexpr double kProbFloor = 1e-12;

inline double cross_entropy(const VectorXd& probabilities, int target_class) {
    if (target_class < 0 || target_class >= probabilities.size()) {
        throw IndexOutOfRange("target class " + std::to_string(target_class) + " out of range");
    }
    return -std::log(std::max(probabilities(target_class), kProbFloor));
}

// Fused softmax + cross-entropy: loss and dLoss/dlogits in one pass.
// class_weight scales both (unit weight == unweighted loss exactly).
inline std::pair<double, VectorXd> softmax_cross_entropy(const VectorXd& logits, int target_class,
                                                         double class_weight = 1.0) {
    const VectorXd p = softmax(logits);
    const double loss = class_weight * cross_entropy(p, target_class);
    VectorXd grad = class_weight * p;
    grad(target_class) -= class_weight;
    return {loss, grad};
}

inline int argmax_lowest_tie(const VectorXd& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) best = i;
    }
    return best;
}

inline FaultClass predict(const Mlp& net, const VectorXd& input) {
    return class_from_index(argmax_lowest_tie(forward(net, input)));
}

// Checkpoint layout: "BFDC" magic, u32 version, u32 num_features,
// u32 num_actions, then float64 little-endian arrays w1,b1,w2,b2,w3,b3 with
// matrices in row-major (input, output) order.
inline constexpr char kCheckpointMagic[4] = {'B', 'F', 'D', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ofstream& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.write(buf, 4);
}

inline std::uint32_t read_u32(std::ifstream& in) {
    char buf[4];
    in.read(buf, 4);
    std::uint32_t v = 0;
    std::memcpy(&v, buf, 4);
    return v;
}

template <typename Mat>
void write_matrix(std::ofstream& out, const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            char buf[8];
            std::memcpy(buf, &v, 8);
            out.write(buf, 8);
        }
    }
}

template <typename Mat>
void read_matrix(std::ifstream& in, Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            char buf[8];
            in.read(buf, 8);
            double v = 0;
            std::memcpy(&v, buf, 8);
            m(r, c) = v;
        }
    }
}

}  // namespace detail

inline void save_checkpoint(const Mlp& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kCheckpointMagic, 4);
    detail::write_u32(out, kCheckpointVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(net.num_features()));
    detail::write_u32(out, static_cast<std::uint32_t>(net.num_actions()));
    detail::write_matrix(out, net.w1);
    detail::write_matrix(out, net.b1);
    detail::write_matrix(out, net.w2);
    detail::write_matrix(out, net.b2);
    detail::write_matrix(out, net.w3);
    detail::write_matrix(out, net.b3);
    if (!out) throw IoError("write failed: " + path);
}

inline Mlp load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile(path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw ParseError(path + ": not a checkpoint file");
    }
    const std::uint32_t version = detail::read_u32(in);
    if (version != kCheckpointVersion) {
        throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto nf = static_cast<int>(detail::read_u32(in));
    const auto na = static_cast<int>(detail::read_u32(in));
    if (nf < 1 || na < 2) throw ParseError(path + ": corrupt checkpoint header");
    Mlp net;
    net.w1.resize(nf, kHiddenSize);
    net.b1.resize(kHiddenSize);
    net.w2.resize(kHiddenSize, kHiddenSize);
    net.b2.resize(kHiddenSize);
    net.w3.resize(kHiddenSize, na);
    net.b3.resize(na);
    detail::read_matrix(in, net.w1);
    detail::read_matrix(in, net.b1);
    detail::read_matrix(in, net.w2);
    detail::read_matrix(in, net.b2);
    detail::read_matrix(in, net.w3);
    detail::read_matrix(in, net.b3);
    if (!in) throw ParseError(path + ": truncated checkpoint");
    return net;
}

}  // namespace bfd
