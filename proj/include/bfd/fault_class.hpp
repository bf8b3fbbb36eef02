#pragma once

#include <array>
#include <string>
#include <string_view>

#include "bfd/errors.hpp"

namespace bfd {

// Canonical class order used everywhere a matrix or vector is indexed by
// class: DevelopingFault, Faulty, Healthy.
enum class FaultClass : int {
    DevelopingFault = 0,
    Faulty = 1,
    Healthy = 2,
};

inline constexpr int kNumClasses = 3;

inline constexpr int class_index(FaultClass c) { return static_cast<int>(c); }

inline FaultClass class_from_index(int i) {
    if (i < 0 || i >= kNumClasses) {
        throw IndexOutOfRange("class index " + std::to_string(i) + " out of range");
    }
    return static_cast<FaultClass>(i);
}

inline constexpr std::array<FaultClass, kNumClasses> all_classes() {
    return {FaultClass::DevelopingFault, FaultClass::Faulty, FaultClass::Healthy};
}

inline std::string to_string(FaultClass c) {
    switch (c) {
        case FaultClass::DevelopingFault: return "developing_fault";
        case FaultClass::Faulty: return "faulty";
        case FaultClass::Healthy: return "healthy";
    }
    throw IndexOutOfRange("invalid FaultClass");
}

inline FaultClass parse_fault_class(std::string_view s) {
    if (s == "developing_fault") return FaultClass::DevelopingFault;
    if (s == "faulty") return FaultClass::Faulty;
    if (s == "healthy") return FaultClass::Healthy;
    throw ParseError("unknown fault class label: " + std::string(s));
}

}  // namespace bfd
