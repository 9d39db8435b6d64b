#include "cvsei/baseline.hpp"

#include <cmath>

#include "cvsei/errors.hpp"

namespace cvsei {

std::vector<double> unwrap_phase(const ComplexSignal& sig) {
    const std::size_t n = sig.length();
    std::vector<double> phase(n);
    if (n == 0) return phase;
    double prev_raw = std::atan2(static_cast<double>(sig.samples[0].imag()),
                                 static_cast<double>(sig.samples[0].real()));
    phase[0] = prev_raw;
    constexpr double pi = 3.14159265358979323846;
    for (std::size_t i = 1; i < n; ++i) {
        const double raw = std::atan2(static_cast<double>(sig.samples[i].imag()),
                                      static_cast<double>(sig.samples[i].real()));
        double d = raw - prev_raw;
        // wrap the step into (-pi, pi]
        while (d > pi) d -= 2.0 * pi;
        while (d <= -pi) d += 2.0 * pi;
        phase[i] = phase[i - 1] + d;
        prev_raw = raw;
    }
    return phase;
}

namespace {

// Population moments; kurtosis is the plain 4th standardized moment.
void moments_into(const std::vector<double>& x, double* out, int component_bit,
                  unsigned& degenerate) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    out[0] = mean;
    out[1] = m2;
    // Variance at the f32 quantization floor counts as zero: a constant
    // component stored in floats still shows ~1e-15 of rounding variance.
    const double floor = 1e-12 * (1.0 + mean * mean);
    if (m2 > floor) {
        const double sd = std::sqrt(m2);
        out[2] = m3 / (sd * sd * sd);
        out[3] = m4 / (m2 * m2);
    } else {
        out[2] = 0.0;
        out[3] = 0.0;
        degenerate |= 1u << component_bit;
    }
}

}  // namespace

InstFeatureVector instantaneous_features(const ComplexSignal& sig) {
    require(sig.length() >= 4, Errc::shape_mismatch,
            "instantaneous_features needs at least 4 samples");

    const std::size_t n = sig.length();
    std::vector<double> amplitude(n);
    for (std::size_t i = 0; i < n; ++i)
        amplitude[i] = std::hypot(static_cast<double>(sig.samples[i].real()),
                                  static_cast<double>(sig.samples[i].imag()));
    std::vector<double> phase = unwrap_phase(sig);
    std::vector<double> frequency(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) frequency[i] = phase[i + 1] - phase[i];

    InstFeatureVector f;
    moments_into(amplitude, f.values.data() + 0, InstFeatureVector::kAmplitude,
                 f.degenerate_components);
    moments_into(phase, f.values.data() + 4, InstFeatureVector::kPhase, f.degenerate_components);
    moments_into(frequency, f.values.data() + 8, InstFeatureVector::kFrequency,
                 f.degenerate_components);
    return f;
}

}  // namespace cvsei
