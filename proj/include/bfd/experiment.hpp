#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bfd/errors.hpp"
#include "bfd/eval.hpp"
#include "bfd/example.hpp"
#include "bfd/features.hpp"
#include "bfd/rl.hpp"
#include "bfd/signal.hpp"
#include "bfd/supervised.hpp"

namespace bfd {

enum class FeatureMode { Windows, Stats };

inline FeatureMode feature_mode_for_model(int model_id) {
    if (model_id < 1 || model_id > 8) {
        throw InvalidParam("model_id must be in 1..8, got " + std::to_string(model_id));
    }
    return model_id <= 4 ? FeatureMode::Windows : FeatureMode::Stats;
}

enum class RewardChoice { Default, Shaped, Custom };

struct ExperimentConfig {
    int model_id = 5;
    std::string data_path;  // manifest.csv
    std::string out_dir;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;

    std::size_t window_len = 1000;
    double overlap = 0.5;
    std::size_t segment_len = 10000;

    HyperParams hp;
    std::size_t timesteps = 20000;
    std::size_t buffer_capacity = 10000;
    int target_sync_interval = 0;

    RewardChoice reward_choice = RewardChoice::Default;
    std::string reward_matrix_path;  // when Custom

    FeatureMode feature_mode() const { return feature_mode_for_model(model_id); }

    bool is_rl_model() const {
        return model_id == 3 || model_id == 4 || model_id == 7 || model_id == 8;
    }
    bool is_reward_loss_model() const { return model_id == 2 || model_id == 6; }
    bool uses_reward_matrix() const { return is_rl_model() || is_reward_loss_model(); }

    RewardMatrix resolve_reward_matrix() const {
        switch (reward_choice) {
            case RewardChoice::Default: return default_reward_matrix();
            case RewardChoice::Shaped: return shaped_reward_matrix();
            case RewardChoice::Custom: return load_reward_matrix(reward_matrix_path);
        }
        throw InvalidParam("invalid reward choice");
    }
};

// ---------------------------------------------------------------------------
// Flat key=value config layer. Precedence: CLI flag > config file > default.

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path);
    ConfigMap m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t");
            return s.substr(b, e - b + 1);
        };
        if (strip(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        m[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return m;
}

// Overlays win left to right.
inline ConfigMap merge_configs(const ConfigMap& base, const ConfigMap& overlay) {
    ConfigMap m = base;
    for (const auto& [k, v] : overlay) m[k] = v;
    return m;
}

namespace detail {

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw InvalidParam("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
    return out;
}

inline double parse_f64(const std::string& key, const std::string& v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw InvalidParam("config key '" + key + "': expected number, got '" + v + "'");
    }
    return out;
}

}  // namespace detail

inline ExperimentConfig config_from_map(const ConfigMap& m) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : m) {
        if (key == "model_id") {
            cfg.model_id = static_cast<int>(detail::parse_u64(key, value));
        } else if (key == "data") {
            cfg.data_path = value;
        } else if (key == "out_dir") {
            cfg.out_dir = value;
        } else if (key == "seed") {
            cfg.seed = detail::parse_u64(key, value);
        } else if (key == "train_fraction") {
            cfg.train_fraction = detail::parse_f64(key, value);
        } else if (key == "window_len") {
            cfg.window_len = detail::parse_u64(key, value);
        } else if (key == "overlap") {
            cfg.overlap = detail::parse_f64(key, value);
        } else if (key == "segment_len") {
            cfg.segment_len = detail::parse_u64(key, value);
        } else if (key == "epochs") {
            cfg.hp.epochs = static_cast<int>(detail::parse_u64(key, value));
        } else if (key == "batch_size") {
            cfg.hp.batch_size = static_cast<int>(detail::parse_u64(key, value));
        } else if (key == "learning_rate") {
            cfg.hp.learning_rate = detail::parse_f64(key, value);
        } else if (key == "epsilon_min") {
            cfg.hp.epsilon_min = detail::parse_f64(key, value);
        } else if (key == "timesteps") {
            cfg.timesteps = detail::parse_u64(key, value);
        } else if (key == "buffer_capacity") {
            cfg.buffer_capacity = detail::parse_u64(key, value);
        } else if (key == "target_sync_interval") {
            cfg.target_sync_interval = static_cast<int>(detail::parse_u64(key, value));
        } else if (key == "reward_matrix") {
            if (value == "default") {
                cfg.reward_choice = RewardChoice::Default;
            } else if (value == "table6") {
                cfg.reward_choice = RewardChoice::Shaped;
            } else {
                cfg.reward_choice = RewardChoice::Custom;
                cfg.reward_matrix_path = value;
            }
        } else if (key == "feature_mode") {
            // forced by model_id; validated below
        } else {
            throw InvalidParam("unknown config key '" + key + "'");
        }
    }
    if (cfg.model_id < 1 || cfg.model_id > 8) {
        throw InvalidParam("model_id must be in 1..8, got " + std::to_string(cfg.model_id));
    }
    if (auto it = m.find("feature_mode"); it != m.end()) {
        const auto forced = cfg.feature_mode() == FeatureMode::Windows ? "windows" : "stats";
        if (it->second != forced) {
            throw InvalidParam("model " + std::to_string(cfg.model_id) + " requires feature_mode=" +
                               forced);
        }
    }
    if (m.find("reward_matrix") == m.end() && cfg.model_id == 8) {
        cfg.reward_choice = RewardChoice::Shaped;
    }
    return cfg;
}

// Canonical resolved form: sorted key=value lines. The digest excludes
// out_dir so identical experiments land on the same digest regardless of
// where their artifacts go.
inline std::string resolved_config_text(const ExperimentConfig& cfg) {
    char buf[64];
    auto f = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string reward;
    switch (cfg.reward_choice) {
        case RewardChoice::Default: reward = "default"; break;
        case RewardChoice::Shaped: reward = "table6"; break;
        case RewardChoice::Custom: reward = cfg.reward_matrix_path; break;
    }
    std::string s;
    s += "batch_size = " + std::to_string(cfg.hp.batch_size) + "\n";
    s += "buffer_capacity = " + std::to_string(cfg.buffer_capacity) + "\n";
    s += "data = " + cfg.data_path + "\n";
    s += "epochs = " + std::to_string(cfg.hp.epochs) + "\n";
    s += "epsilon_min = " + f(cfg.hp.epsilon_min) + "\n";
    s += "feature_mode = " +
         std::string(cfg.feature_mode() == FeatureMode::Windows ? "windows" : "stats") + "\n";
    s += "learning_rate = " + f(cfg.hp.learning_rate) + "\n";
    s += "model_id = " + std::to_string(cfg.model_id) + "\n";
    s += "overlap = " + f(cfg.overlap) + "\n";
    s += "reward_matrix = " + reward + "\n";
    s += "seed = " + std::to_string(cfg.seed) + "\n";
    s += "segment_len = " + std::to_string(cfg.segment_len) + "\n";
    s += "target_sync_interval = " + std::to_string(cfg.target_sync_interval) + "\n";
    s += "timesteps = " + std::to_string(cfg.timesteps) + "\n";
    s += "train_fraction = " + f(cfg.train_fraction) + "\n";
    s += "window_len = " + std::to_string(cfg.window_len) + "\n";
    return s;
}

inline std::string config_digest(const ExperimentConfig& cfg) {
    return fnv1a_hex(resolved_config_text(cfg));
}

// ---------------------------------------------------------------------------
// Pipeline

struct PreparedData {
    std::vector<Example> train;
    std::vector<Example> test;
    Normalizer normalizer;
};

// Split signals 80/20, cut each side per the model's feature mode, fit the
// normalizer on training rows only.
inline PreparedData prepare_data(const ExperimentConfig& cfg,
                                 const std::vector<LabeledSignal>& signals) {
    SplitSpec split{cfg.train_fraction, cfg.seed, true};
    auto [train_sigs, test_sigs] = split_train_test(signals, split);

    PreparedData out;
    if (cfg.feature_mode() == FeatureMode::Windows) {
        WindowingSpec wspec{cfg.window_len, cfg.overlap};
        std::vector<Window> train_w, test_w;
        for (const auto& s : train_sigs) {
            auto w = make_windows(s, wspec);
            train_w.insert(train_w.end(), std::make_move_iterator(w.begin()),
                           std::make_move_iterator(w.end()));
        }
        for (const auto& s : test_sigs) {
            auto w = make_windows(s, wspec);
            test_w.insert(test_w.end(), std::make_move_iterator(w.begin()),
                          std::make_move_iterator(w.end()));
        }
        std::vector<std::vector<double>> rows;
        rows.reserve(train_w.size());
        for (const auto& w : train_w) rows.push_back(w.values);
        out.normalizer = fit_normalizer(rows);
        out.train = examples_from_windows(train_w, out.normalizer);
        out.test = examples_from_windows(test_w, out.normalizer);
    } else {
        auto train_f = build_feature_dataset(train_sigs, cfg.segment_len);
        auto test_f = build_feature_dataset(test_sigs, cfg.segment_len);
        if (train_f.empty() || test_f.empty()) {
            throw InvalidParam("segment_len " + std::to_string(cfg.segment_len) +
                               " leaves an empty feature set");
        }
        std::vector<std::array<double, kNumFeatures>> rows;
        rows.reserve(train_f.size());
        for (const auto& fv : train_f) rows.push_back(fv.values());
        out.normalizer = fit_normalizer(rows);
        out.train = examples_from_features(train_f, out.normalizer);
        out.test = examples_from_features(test_f, out.normalizer);
    }
    return out;
}

struct TrainOutcome {
    Mlp net;
    MetricsReport report;
    std::vector<EpisodePoint> reward_curve;  // RL models
    std::vector<double> epoch_losses;        // supervised models
    double wall_time_s = 0.0;
};

// Train the configured model on already-prepared data and evaluate on the
// test side. Deterministic given (config, signals).
inline TrainOutcome run_experiment(const ExperimentConfig& cfg, const PreparedData& data) {
    if (data.train.empty() || data.test.empty()) throw InvalidParam("empty train or test set");
    const auto t0 = std::chrono::steady_clock::now();

    TrainOutcome out;
    switch (cfg.model_id) {
        case 1:
        case 5: {
            TrainConfig tc;
            tc.hp = cfg.hp;
            tc.loss_kind = LossKind::CrossEntropy;
            auto res = train_ann(data.train, tc, cfg.seed);
            out.net = std::move(res.net);
            out.epoch_losses = std::move(res.epoch_losses);
            break;
        }
        case 2:
        case 6: {
            TrainConfig tc;
            tc.hp = cfg.hp;
            tc.loss_kind = LossKind::ExpectedReward;
            tc.reward_matrix = cfg.resolve_reward_matrix();
            auto res = train_ann(data.train, tc, cfg.seed);
            out.net = std::move(res.net);
            out.epoch_losses = std::move(res.epoch_losses);
            break;
        }
        case 3:
        case 7: {
            DqnOptions opts{cfg.buffer_capacity, cfg.target_sync_interval, false};
            auto res = dqn_train_epoch(data.train, cfg.hp, cfg.resolve_reward_matrix(), cfg.seed,
                                       opts);
            out.net = std::move(res.net);
            out.reward_curve = std::move(res.episodes);
            break;
        }
        case 4:
        case 8: {
            DqnOptions opts{cfg.buffer_capacity, cfg.target_sync_interval, false};
            auto res = dqn_train_timestep(data.train, cfg.hp, cfg.resolve_reward_matrix(),
                                          cfg.timesteps, cfg.seed, opts);
            out.net = std::move(res.net);
            out.reward_curve = std::move(res.episodes);
            break;
        }
        default:
            throw InvalidParam("model_id must be in 1..8");
    }

    const auto predictions = evaluate_model(out.net, data.test);
    std::vector<FaultClass> actuals;
    actuals.reserve(data.test.size());
    for (const auto& e : data.test) actuals.push_back(e.label);
    out.report = build_report(cfg.model_id, cfg.seed, config_digest(cfg), predictions, actuals,
                              out.reward_curve);
    out.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// ---------------------------------------------------------------------------
// Run directory artifacts

struct RunArtifacts {
    std::string checkpoint_path;
    std::string report_path;
    std::string reward_curve_path;  // empty unless RL model
    std::string confusion_path;
};

inline void write_normalizer(const std::string& path, const Normalizer& n) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    for (std::size_t j = 0; j < n.means.size(); ++j) {
        out << (j ? "," : "") << n.means[j];
    }
    out << '\n';
    for (std::size_t j = 0; j < n.stds.size(); ++j) {
        out << (j ? "," : "") << n.stds[j];
    }
    out << '\n';
}

inline Normalizer read_normalizer(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path);
    auto parse_row = [&](std::vector<double>& row) {
        std::string line;
        if (!std::getline(in, line)) throw ParseError(path + ": truncated normalizer");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const char* p = line.data();
        const char* end = p + line.size();
        while (p < end) {
            double v = 0;
            auto [ptr, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{}) throw ParseError(path + ": bad normalizer value");
            row.push_back(v);
            p = ptr;
            if (p < end && *p == ',') ++p;
        }
    };
    Normalizer n;
    parse_row(n.means);
    parse_row(n.stds);
    if (n.means.size() != n.stds.size() || n.means.empty()) {
        throw ParseError(path + ": inconsistent normalizer rows");
    }
    return n;
}

inline RunArtifacts write_run_artifacts(const ExperimentConfig& cfg, const PreparedData& data,
                                        const TrainOutcome& outcome) {
    namespace fs = std::filesystem;
    if (cfg.out_dir.empty()) throw InvalidParam("out_dir is required");
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);

    RunArtifacts a;
    a.checkpoint_path = (dir / "checkpoint.bin").string();
    a.report_path = (dir / "report.json").string();
    a.confusion_path = (dir / "confusion.csv").string();
    save_checkpoint(outcome.net, a.checkpoint_path);
    {
        std::ofstream out(a.report_path);
        if (!out) throw IoError("cannot write " + a.report_path);
        out << report_to_json(outcome.report);
    }
    write_confusion_csv(a.confusion_path, outcome.report.confusion);
    if (cfg.is_rl_model()) {
        a.reward_curve_path = (dir / "reward_curve.csv").string();
        write_reward_curve_csv(a.reward_curve_path, outcome.reward_curve);
    } else {
        write_loss_csv((dir / "loss.csv").string(), outcome.epoch_losses);
    }
    write_normalizer((dir / "normalizer.csv").string(), data.normalizer);
    {
        std::ofstream out(dir / "config.resolved");
        if (!out) throw IoError("cannot write config.resolved");
        out << resolved_config_text(cfg);
    }
    {
        std::ofstream out(dir / "wall_time.txt");
        out.precision(3);
        out << std::fixed << outcome.wall_time_s << '\n';
    }
    return a;
}

}  // namespace bfd
