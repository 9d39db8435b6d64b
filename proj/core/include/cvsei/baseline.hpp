#pragma once

#include <array>
#include <vector>

#include "cvsei/signal.hpp"

namespace cvsei {

// Hand-crafted instantaneous-statistics baseline: mean, variance, skewness
// and kurtosis (non-excess, population moments) of instantaneous amplitude,
// unwrapped phase, and frequency (phase first difference).
struct InstFeatureVector {
    // Order: [amp, phase, freq] x [mean, var, skew, kurt].
    std::array<double, 12> values{};
    // Bit c set when component c had zero variance; its skew/kurt are
    // reported as 0 by convention so downstream classifiers stay finite.
    unsigned degenerate_components = 0;

    static constexpr int kAmplitude = 0;
    static constexpr int kPhase = 1;
    static constexpr int kFrequency = 2;
};

// Throws shape_mismatch when the signal is shorter than 4 samples.
InstFeatureVector instantaneous_features(const ComplexSignal& sig);

// Unwrapped instantaneous phase: consecutive differences lie in (-pi, pi].
std::vector<double> unwrap_phase(const ComplexSignal& sig);

}  // namespace cvsei
