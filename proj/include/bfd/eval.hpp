#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "bfd/errors.hpp"
#include "bfd/fault_class.hpp"
#include "bfd/rl.hpp"

namespace bfd {

struct ConfusionMatrix {
    std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> c{};  // [actual][predicted]
    std::int64_t total = 0;

    std::int64_t trace() const {
        std::int64_t t = 0;
        for (int k = 0; k < kNumClasses; ++k) t += c[k][k];
        return t;
    }

    std::int64_t row_sum(int k) const { return c[k][0] + c[k][1] + c[k][2]; }
    std::int64_t col_sum(int k) const { return c[0][k] + c[1][k] + c[2][k]; }
};

inline ConfusionMatrix confusion_from_predictions(const std::vector<FaultClass>& actuals,
                                                  const std::vector<FaultClass>& predictions) {
    if (actuals.size() != predictions.size()) {
        throw LengthMismatch("actuals size " + std::to_string(actuals.size()) +
                             " vs predictions size " + std::to_string(predictions.size()));
    }
    if (actuals.empty()) throw InvalidParam("need at least one prediction");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        cm.c[class_index(actuals[i])][class_index(predictions[i])] += 1;
    }
    cm.total = static_cast<std::int64_t>(actuals.size());
    return cm;
}

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool zero_division = false;  // some denominator was 0 and the value was set to 0
};

struct MetricsReport {
    double accuracy = 0.0;
    std::array<ClassMetrics, kNumClasses> per_class;
    ClassMetrics macro;
    ConfusionMatrix confusion;
    int model_id = 0;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::vector<EpisodePoint> reward_curve;  // empty unless an RL model
};

// Per-class precision/recall/F1 plus unweighted macro averages. Zero
// denominators yield 0 with the zero_division flag set.
inline MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
    if (cm.total < 1) throw InvalidParam("empty confusion matrix");
    MetricsReport r;
    r.confusion = cm;
    r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total);
    for (int k = 0; k < kNumClasses; ++k) {
        ClassMetrics& m = r.per_class[k];
        const auto col = cm.col_sum(k);
        const auto row = cm.row_sum(k);
        const auto diag = cm.c[k][k];
        if (col == 0) {
            m.zero_division = true;
        } else {
            m.precision = static_cast<double>(diag) / static_cast<double>(col);
        }
        if (row == 0) {
            m.zero_division = true;
        } else {
            m.recall = static_cast<double>(diag) / static_cast<double>(row);
        }
        if (m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        } else {
            m.zero_division = true;
        }
        r.macro.precision += m.precision / kNumClasses;
        r.macro.recall += m.recall / kNumClasses;
        r.macro.f1 += m.f1 / kNumClasses;
    }
    return r;
}

namespace detail {

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline MetricsReport build_report(int model_id, std::uint64_t seed, const std::string& config_digest,
                                  const std::vector<FaultClass>& predictions,
                                  const std::vector<FaultClass>& actuals,
                                  const std::vector<EpisodePoint>& reward_curve = {}) {
    MetricsReport r = metrics_from_confusion(confusion_from_predictions(actuals, predictions));
    r.model_id = model_id;
    r.seed = seed;
    r.config_digest = config_digest;
    r.reward_curve = reward_curve;
    return r;
}

// Deterministic JSON: keys sorted, floats fixed at 6 decimal places.
inline std::string report_to_json(const MetricsReport& r) {
    std::string s;
    s += "{\n";
    s += "  \"accuracy\": " + detail::fixed6(r.accuracy) + ",\n";
    s += "  \"config_digest\": \"" + r.config_digest + "\",\n";
    s += "  \"confusion\": [";
    for (int a = 0; a < kNumClasses; ++a) {
        s += a == 0 ? "[" : ", [";
        for (int p = 0; p < kNumClasses; ++p) {
            if (p) s += ", ";
            s += std::to_string(r.confusion.c[a][p]);
        }
        s += "]";
    }
    s += "],\n";
    auto class_block = [](const ClassMetrics& m) {
        return "{\"f1\": " + detail::fixed6(m.f1) + ", \"precision\": " + detail::fixed6(m.precision) +
               ", \"recall\": " + detail::fixed6(m.recall) + "}";
    };
    s += "  \"macro\": " + class_block(r.macro) + ",\n";
    s += "  \"model_id\": " + std::to_string(r.model_id) + ",\n";
    s += "  \"per_class\": {";
    for (int k = 0; k < kNumClasses; ++k) {
        if (k) s += ", ";
        s += "\"" + to_string(class_from_index(k)) + "\": " + class_block(r.per_class[k]);
    }
    s += "},\n";
    if (!r.reward_curve.empty()) {
        s += "  \"reward_curve\": [";
        for (std::size_t i = 0; i < r.reward_curve.size(); ++i) {
            if (i) s += ", ";
            const auto& e = r.reward_curve[i];
            s += "[" + std::to_string(e.episode) + ", " + detail::fixed6(e.cumulative_reward) +
                 ", " + detail::fixed6(e.epsilon) + "]";
        }
        s += "],\n";
    }
    s += "  \"seed\": " + std::to_string(r.seed) + "\n";
    s += "}\n";
    return s;
}

inline void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "actual\\predicted";
    for (int p = 0; p < kNumClasses; ++p) out << ',' << to_string(class_from_index(p));
    out << '\n';
    for (int a = 0; a < kNumClasses; ++a) {
        out << to_string(class_from_index(a));
        for (int p = 0; p < kNumClasses; ++p) out << ',' << cm.c[a][p];
        out << '\n';
    }
}

}  // namespace bfd
