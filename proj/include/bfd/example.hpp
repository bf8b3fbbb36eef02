#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "bfd/fault_class.hpp"
#include "bfd/features.hpp"

namespace bfd {

// One network-ready training example: a (usually normalized) input row plus
// its true class. Produced from either raw windows or feature vectors.
struct Example {
    Eigen::VectorXd features;
    FaultClass label;
};

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<Example> examples_from_windows(const std::vector<Window>& windows,
                                                  const Normalizer& norm) {
    std::vector<Example> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        out.push_back({to_eigen(norm.apply(w.values)), w.label});
    }
    return out;
}

inline std::vector<Example> examples_from_features(const std::vector<FeatureVector>& features,
                                                   const Normalizer& norm) {
    std::vector<Example> out;
    out.reserve(features.size());
    for (const auto& f : features) {
        const auto vals = f.values();
        out.push_back({to_eigen(norm.apply(vals)), f.label});
    }
    return out;
}

}  // namespace bfd
