#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "bfd/errors.hpp"
#include "bfd/fault_class.hpp"
#include "bfd/signal.hpp"

namespace bfd {

struct WindowingSpec {
    std::size_t window_len = 1000;
    double overlap_fraction = 0.5;

    std::size_t step() const {
        const auto s = static_cast<std::size_t>(
            std::llround(static_cast<double>(window_len) * (1.0 - overlap_fraction)));
        return s;
    }

    void validate() const {
        if (window_len < 2) throw InvalidParam("window_len must be >= 2");
        if (overlap_fraction < 0.0 || overlap_fraction >= 1.0) {
            throw InvalidParam("overlap_fraction must be in [0, 1)");
        }
        if (step() < 1) throw InvalidParam("window step rounds to zero");
    }
};

struct Window {
    std::vector<double> values;
    FaultClass label;
    std::string parent_id;
    std::size_t start_index;
};

inline constexpr std::size_t kNumFeatures = 11;

struct FeatureVector {
    double mean = 0, std_dev = 0, peak_to_peak = 0, rms = 0, skewness = 0, kurtosis = 0,
           crest_factor = 0, shape_factor = 0, impulse_factor = 0, margin_factor = 0,
           peak_factor = 0;
    FaultClass label = FaultClass::Healthy;

    std::array<double, kNumFeatures> values() const {
        return {mean,         std_dev,      peak_to_peak,  rms,           skewness, kurtosis,
                crest_factor, shape_factor, impulse_factor, margin_factor, peak_factor};
    }
};

inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "mean",         "std_dev",      "peak_to_peak",  "rms",           "skewness", "kurtosis",
    "crest_factor", "shape_factor", "impulse_factor", "margin_factor", "peak_factor"};

inline std::vector<Window> make_windows(const LabeledSignal& signal, const WindowingSpec& spec) {
    spec.validate();
    const std::size_t n = signal.samples.size();
    if (n < spec.window_len) throw SignalTooShort(n, spec.window_len);
    const std::size_t step = spec.step();
    const std::size_t count = (n - spec.window_len) / step + 1;
    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = w * step;
        Window win;
        win.values.assign(signal.samples.begin() + static_cast<std::ptrdiff_t>(start),
                          signal.samples.begin() + static_cast<std::ptrdiff_t>(start + spec.window_len));
        win.label = signal.label;
        win.parent_id = signal.source_id;
        win.start_index = start;
        out.push_back(std::move(win));
    }
    return out;
}

// The 11 statistical descriptors. Population moments; kurtosis is non-excess.
// Label is left at its default and attached by the caller.
inline FeatureVector extract_features(std::span<const double> segment) {
    const std::size_t n = segment.size();
    if (n < 2) throw InvalidParam("segment length must be >= 2");

    double sum = 0, min_v = segment[0], max_v = segment[0];
    for (double x : segment) {
        if (!std::isfinite(x)) throw InvalidParam("segment contains non-finite value");
        sum += x;
        min_v = std::min(min_v, x);
        max_v = std::max(max_v, x);
    }
    const double nd = static_cast<double>(n);
    const double mu = sum / nd;

    double sq = 0, abs_sum = 0, abs_peak = 0, sqrt_abs_sum = 0, var = 0;
    for (double x : segment) {
        sq += x * x;
        const double ax = std::fabs(x);
        abs_sum += ax;
        abs_peak = std::max(abs_peak, ax);
        sqrt_abs_sum += std::sqrt(ax);
        var += (x - mu) * (x - mu);
    }
    var /= nd;
    const double sigma = std::sqrt(var);
    const double m1 = abs_sum / nd;
    if (sigma == 0.0 || m1 == 0.0) {
        throw DegenerateSegment("constant or all-zero segment");
    }

    double skew = 0, kurt = 0;
    for (double x : segment) {
        const double z = (x - mu) / sigma;
        skew += z * z * z;
        kurt += z * z * z * z;
    }

    FeatureVector f;
    f.mean = mu;
    f.std_dev = sigma;
    f.peak_to_peak = max_v - min_v;
    f.rms = std::sqrt(sq / nd);
    f.skewness = skew / nd;
    f.kurtosis = kurt / nd;
    f.crest_factor = abs_peak / f.rms;
    f.shape_factor = f.rms / m1;
    f.impulse_factor = abs_peak / m1;
    const double mean_sqrt_abs = sqrt_abs_sum / nd;
    f.margin_factor = abs_peak / (mean_sqrt_abs * mean_sqrt_abs);
    f.peak_factor = abs_peak;
    return f;
}

// Consecutive non-overlapping segments of segment_len per signal, tail
// dropped; one feature vector per segment.
inline std::vector<FeatureVector> build_feature_dataset(const std::vector<LabeledSignal>& signals,
                                                        std::size_t segment_len) {
    if (segment_len < 2) throw InvalidParam("segment_len must be >= 2");
    std::vector<FeatureVector> out;
    for (const auto& sig : signals) {
        const std::size_t n_segments = sig.samples.size() / segment_len;
        for (std::size_t s = 0; s < n_segments; ++s) {
            std::span<const double> seg(sig.samples.data() + s * segment_len, segment_len);
            FeatureVector f;
            try {
                f = extract_features(seg);
            } catch (const DegenerateSegment&) {
                throw DegenerateSegment("degenerate segment " + std::to_string(s) + " of " +
                                        sig.source_id);
            }
            f.label = sig.label;
            out.push_back(f);
        }
    }
    return out;
}

// Per-feature z-score transform fitted on training data only. Standard
// deviations below the epsilon floor are replaced by 1.
struct Normalizer {
    std::vector<double> means;
    std::vector<double> stds;

    std::vector<double> apply(std::span<const double> row) const {
        if (row.size() != means.size()) {
            throw ShapeMismatch("normalizer dim " + std::to_string(means.size()) +
                                " vs row dim " + std::to_string(row.size()));
        }
        std::vector<double> out(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - means[j]) / stds[j];
        return out;
    }
};

inline constexpr double kNormalizerEpsilon = 1e-12;

template <typename Rows>
Normalizer fit_normalizer(const Rows& rows) {
    if (rows.empty()) throw EmptyTrainingSet("cannot fit normalizer on empty training set");
    const std::size_t dim = rows.front().size();
    const double n = static_cast<double>(rows.size());
    Normalizer norm;
    norm.means.assign(dim, 0.0);
    norm.stds.assign(dim, 0.0);
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < dim; ++j) norm.means[j] += r[j];
    }
    for (std::size_t j = 0; j < dim; ++j) norm.means[j] /= n;
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = r[j] - norm.means[j];
            norm.stds[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < dim; ++j) {
        norm.stds[j] = std::sqrt(norm.stds[j] / n);
        if (norm.stds[j] < kNormalizerEpsilon) norm.stds[j] = 1.0;
    }
    return norm;
}

inline void write_feature_csv(const std::string& path, const std::vector<FeatureVector>& features) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (std::size_t j = 0; j < kNumFeatures; ++j) out << kFeatureNames[j] << ',';
    out << "label\n";
    out.precision(17);
    for (const auto& f : features) {
        for (double v : f.values()) out << v << ',';
        out << to_string(f.label) << '\n';
    }
}

}  // namespace bfd
