#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "bfd/errors.hpp"
#include "bfd/fault_class.hpp"
#include "bfd/rng.hpp"

namespace bfd {

// Sample rate assigned to signals loaded from manifests, which carry no rate
// column (42 kHz, the rate of the target recordings).
inline constexpr double kDefaultSampleRateHz = 42000.0;

struct LabeledSignal {
    std::vector<double> samples;
    FaultClass label = FaultClass::Healthy;
    double sample_rate_hz = kDefaultSampleRateHz;
    std::string source_id;
};

enum class SignalFormat { Csv, F32le };

struct ManifestEntry {
    std::string path;
    FaultClass label;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    SignalFormat format_tag = SignalFormat::F32le;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool stratified = true;
};

namespace detail {

inline std::vector<double> read_csv_signal(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile(path);
    std::vector<double> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double v = 0.0;
        const char* first = line.data();
        const char* last = first + line.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad sample '" + line + "'");
        }
        if (!std::isfinite(v)) throw NonFiniteSample(path, samples.size());
        samples.push_back(v);
    }
    return samples;
}

inline std::vector<double> read_f32le_signal(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile(path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() % 4 != 0) {
        throw ParseError(path + ": size " + std::to_string(raw.size()) + " not a multiple of 4");
    }
    std::vector<double> samples(raw.size() / 4);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, raw.data() + 4 * i, 4);  // assumes little-endian host
        float f = 0.0f;
        std::memcpy(&f, &bits, 4);
        if (!std::isfinite(f)) throw NonFiniteSample(path, i);
        samples[i] = static_cast<double>(f);
    }
    return samples;
}

}  // namespace detail

inline std::vector<LabeledSignal> load_dataset(const DatasetManifest& manifest) {
    std::vector<LabeledSignal> out;
    out.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        LabeledSignal sig;
        sig.samples = manifest.format_tag == SignalFormat::Csv
                          ? detail::read_csv_signal(e.path)
                          : detail::read_f32le_signal(e.path);
        if (sig.samples.empty()) throw ParseError(e.path + ": empty signal");
        sig.label = e.label;
        sig.source_id = e.path;
        out.push_back(std::move(sig));
    }
    return out;
}

// Manifest CSV: header `path,label`, one entry per line. Relative paths are
// resolved against the manifest's directory. Format is inferred from the
// first entry's extension (.csv or .f32).
inline DatasetManifest load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw MissingFile(manifest_path);
    const auto base = std::filesystem::path(manifest_path).parent_path();
    DatasetManifest m;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            if (line != "path,label") throw ParseError(manifest_path + ": expected header 'path,label'");
            header = false;
            continue;
        }
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw ParseError(manifest_path + ": bad line '" + line + "'");
        std::filesystem::path p(line.substr(0, comma));
        if (p.is_relative()) p = base / p;
        m.entries.push_back({p.string(), parse_fault_class(line.substr(comma + 1))});
    }
    if (!m.entries.empty()) {
        m.format_tag = m.entries.front().path.ends_with(".csv") ? SignalFormat::Csv
                                                                : SignalFormat::F32le;
    }
    return m;
}

inline void write_f32le_signal(const std::string& path, const std::vector<double>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (double v : samples) {
        const float f = static_cast<float>(v);
        std::uint32_t bits = 0;
        std::memcpy(&bits, &f, 4);
        char buf[4];
        std::memcpy(buf, &bits, 4);
        out.write(buf, 4);
    }
}

// Per-class impulse amplitudes for the synthetic generator, in the order
// (healthy, developing fault, faulty). Healthy must be 0.
struct ImpulseAmps {
    double healthy = 0.0;
    double developing = 0.5;
    double faulty = 2.0;

    double for_class(FaultClass c) const {
        switch (c) {
            case FaultClass::Healthy: return healthy;
            case FaultClass::DevelopingFault: return developing;
            case FaultClass::Faulty: return faulty;
        }
        throw IndexOutOfRange("invalid FaultClass");
    }
};

// Synthetic bearing-like recording: shaft-frequency sinusoid + Gaussian noise
// + a periodic decaying-exponential impulse train whose amplitude encodes the
// fault class. Pure function of its arguments.
inline std::vector<LabeledSignal> generate_synthetic_dataset(std::size_t n_per_class,
                                                             std::size_t signal_len,
                                                             std::uint64_t seed,
                                                             double noise_sigma,
                                                             const ImpulseAmps& impulse_amp) {
    if (n_per_class < 1) throw InvalidParam("n_per_class must be >= 1");
    if (signal_len < 1000) throw InvalidParam("signal_len must be >= 1000");
    if (noise_sigma < 0) throw InvalidParam("noise_sigma must be >= 0");
    if (impulse_amp.healthy != 0.0) throw InvalidParam("healthy impulse amplitude must be 0");
    if (impulse_amp.developing < 0 || impulse_amp.faulty < 0) {
        throw InvalidParam("impulse amplitudes must be >= 0");
    }

    constexpr double fs = 10000.0;       // Hz
    constexpr double shaft_hz = 35.0;
    constexpr std::size_t impulse_period = 70;  // samples, ~4.1x shaft
    constexpr std::size_t kernel_len = 60;
    constexpr double tau = 10.0;         // samples
    constexpr double resonance_hz = 2000.0;

    std::array<double, kernel_len> kernel{};
    for (std::size_t k = 0; k < kernel_len; ++k) {
        kernel[k] = std::exp(-static_cast<double>(k) / tau) *
                    std::sin(2.0 * M_PI * resonance_hz * static_cast<double>(k) / fs);
    }

    Rng rng(seed);
    std::vector<LabeledSignal> out;
    out.reserve(3 * n_per_class);
    for (FaultClass c : all_classes()) {
        const double amp = impulse_amp.for_class(c);
        for (std::size_t i = 0; i < n_per_class; ++i) {
            LabeledSignal sig;
            sig.label = c;
            sig.sample_rate_hz = fs;
            sig.source_id = "synthetic/" + to_string(c) + "/" + std::to_string(i);
            sig.samples.resize(signal_len);
            const double phase = rng.uniform(0.0, 2.0 * M_PI);
            for (std::size_t n = 0; n < signal_len; ++n) {
                sig.samples[n] = std::sin(2.0 * M_PI * shaft_hz * static_cast<double>(n) / fs + phase) +
                                 rng.normal(0.0, noise_sigma);
            }
            if (amp > 0.0) {
                const std::size_t start = rng.below(impulse_period);
                for (std::size_t s = start; s < signal_len; s += impulse_period) {
                    const std::size_t e = std::min(kernel_len, signal_len - s);
                    for (std::size_t k = 0; k < e; ++k) sig.samples[s + k] += amp * kernel[k];
                }
            }
            out.push_back(std::move(sig));
        }
    }
    return out;
}

// Stratified (by default) seeded train/test split. Works on anything with a
// `label` member. Per-class test count = round((1-train_fraction)*count).
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& data,
                                                           const SplitSpec& spec) {
    if (data.empty()) throw InvalidParam("cannot split empty dataset");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw InvalidParam("train_fraction must be in (0, 1)");
    }
    Rng rng(spec.seed);
    std::vector<T> train, test;
    if (spec.stratified) {
        std::array<std::vector<std::size_t>, kNumClasses> by_class;
        for (std::size_t i = 0; i < data.size(); ++i) {
            by_class[class_index(data[i].label)].push_back(i);
        }
        for (int c = 0; c < kNumClasses; ++c) {
            if (by_class[c].empty()) {
                throw EmptyClass("class " + to_string(class_from_index(c)) +
                                 " absent from dataset");
            }
        }
        for (int c = 0; c < kNumClasses; ++c) {
            auto& idx = by_class[c];
            rng.shuffle(idx);
            const auto n_test = static_cast<std::size_t>(
                std::llround((1.0 - spec.train_fraction) * static_cast<double>(idx.size())));
            for (std::size_t i = 0; i < idx.size(); ++i) {
                (i < n_test ? test : train).push_back(data[idx[i]]);
            }
        }
        // Mix classes so batch order is not class-blocked.
        rng.shuffle(train);
        rng.shuffle(test);
    } else {
        std::vector<std::size_t> idx(data.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        const auto n_test = static_cast<std::size_t>(
            std::llround((1.0 - spec.train_fraction) * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < n_test ? test : train).push_back(data[idx[i]]);
        }
    }
    return {std::move(train), std::move(test)};
}

}  // namespace bfd
