#include <doctest.h>

#include <cmath>

#include "cvsei/baseline.hpp"
#include "cvsei/errors.hpp"
#include "oracles.hpp"

using namespace cvsei;

namespace {

ComplexSignal tone(std::size_t n, double omega) {
    ComplexSignal s;
    s.sample_rate_hz = 1e6;
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ang = omega * static_cast<double>(i);
        s.samples[i] = {static_cast<float>(std::cos(ang)), static_cast<float>(std::sin(ang))};
    }
    return s;
}

}  // namespace

TEST_SUITE("baseline_features") {

TEST_CASE("complex exponential: flat amplitude, linear phase") {
    const double omega = 0.37;
    const InstFeatureVector f = instantaneous_features(tone(256, omega));
    // amplitude is constant -> variance ~ float quantization, degenerate path
    CHECK(f.values[1] < 1e-9);
    CHECK((f.degenerate_components & (1u << InstFeatureVector::kAmplitude)) != 0);
    CHECK(f.values[2] == 0.0);  // skew convention
    CHECK(f.values[3] == 0.0);  // kurt convention
    // frequency: first difference of unwrapped phase = omega
    CHECK(f.values[8] == doctest::Approx(omega).epsilon(1e-6));
    CHECK(f.values[9] < 1e-9);
}

TEST_CASE("real constant signal has zero phase variance") {
    ComplexSignal s;
    s.sample_rate_hz = 1e6;
    s.samples.assign(64, {2.0f, 0.0f});
    const InstFeatureVector f = instantaneous_features(s);
    CHECK(f.values[4] == 0.0);  // phase mean
    CHECK(f.values[5] == 0.0);  // phase variance
    CHECK((f.degenerate_components & (1u << InstFeatureVector::kPhase)) != 0);
}

TEST_CASE("all 12 values match the two-pass moment oracle") {
    Rng rng(3);
    ComplexSignal s;
    s.sample_rate_hz = 1e6;
    s.samples.resize(200);
    for (auto& v : s.samples)
        v = {static_cast<float>(rng.normal()), static_cast<float>(rng.normal())};
    const InstFeatureVector f = instantaneous_features(s);

    std::vector<double> amp(200);
    for (std::size_t i = 0; i < 200; ++i)
        amp[i] = std::hypot(static_cast<double>(s.samples[i].real()),
                            static_cast<double>(s.samples[i].imag()));
    const std::vector<double> phase = unwrap_phase(s);
    std::vector<double> freq(199);
    for (std::size_t i = 0; i < 199; ++i) freq[i] = phase[i + 1] - phase[i];

    const oracles::Moments ma = oracles::two_pass_moments(amp);
    const oracles::Moments mp = oracles::two_pass_moments(phase);
    const oracles::Moments mf = oracles::two_pass_moments(freq);
    const double expect[12] = {ma.mean, ma.var, ma.skew, ma.kurt, mp.mean, mp.var,
                               mp.skew, mp.kurt, mf.mean, mf.var, mf.skew, mf.kurt};
    for (int k = 0; k < 12; ++k)
        CHECK(f.values[static_cast<std::size_t>(k)] ==
              doctest::Approx(expect[k]).epsilon(1e-9));
}

TEST_CASE("standardized amplitude moments are scale invariant") {
    Rng rng(5);
    ComplexSignal s;
    s.sample_rate_hz = 1e6;
    s.samples.resize(128);
    for (auto& v : s.samples)
        v = {static_cast<float>(1.0 + 0.3 * rng.normal()),
             static_cast<float>(0.5 + 0.2 * rng.normal())};
    const InstFeatureVector base = instantaneous_features(s);
    ComplexSignal scaled = s;
    for (auto& v : scaled.samples) v *= 4.0f;
    const InstFeatureVector big = instantaneous_features(scaled);
    CHECK(big.values[2] == doctest::Approx(base.values[2]).epsilon(1e-6));
    CHECK(big.values[3] == doctest::Approx(base.values[3]).epsilon(1e-6));
}

TEST_CASE("unwrapped phase steps stay within (-pi, pi]") {
    Rng rng(7);
    ComplexSignal s;
    s.sample_rate_hz = 1e6;
    s.samples.resize(300);
    for (auto& v : s.samples)
        v = {static_cast<float>(rng.normal()), static_cast<float>(rng.normal())};
    const auto phase = unwrap_phase(s);
    constexpr double pi = 3.14159265358979323846;
    for (std::size_t i = 1; i < phase.size(); ++i) {
        const double d = phase[i] - phase[i - 1];
        CHECK(d > -pi);
        CHECK(d <= pi + 1e-12);
    }
}

TEST_CASE("signals shorter than 4 samples are rejected") {
    ComplexSignal s;
    s.samples.assign(3, {1.0f, 0.0f});
    CHECK_THROWS_AS(instantaneous_features(s), Error);
}

TEST_CASE("nearest-centroid on baseline features beats chance on impaired bursts") {
    // Separability sanity for the simulator: severity 0.5, SNR 20 dB.
    const int classes = 5, per_class = 30;
    std::vector<EmitterProfile> profiles;
    for (int c = 0; c < classes; ++c)
        profiles.push_back(make_emitter_profile(static_cast<std::uint64_t>(c), 0.5));
    const LabeledDataset d = generate_dataset(profiles, per_class, 20.0, 1717);

    std::vector<std::array<double, 12>> feats(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        feats[i] = instantaneous_features(d.signals[i]).values;

    // split even/odd, standardize with train stats
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < d.size(); ++i) (i % 2 == 0 ? train : test).push_back(i);
    std::array<double, 12> mean{}, sd{};
    for (std::size_t i : train)
        for (int k = 0; k < 12; ++k) mean[static_cast<std::size_t>(k)] += feats[i][static_cast<std::size_t>(k)];
    for (auto& m : mean) m /= static_cast<double>(train.size());
    for (std::size_t i : train)
        for (int k = 0; k < 12; ++k) {
            const double v = feats[i][static_cast<std::size_t>(k)] - mean[static_cast<std::size_t>(k)];
            sd[static_cast<std::size_t>(k)] += v * v;
        }
    for (auto& s : sd) s = std::sqrt(s / static_cast<double>(train.size())) + 1e-12;

    std::vector<std::array<double, 12>> centroid(static_cast<std::size_t>(classes));
    std::vector<int> count(static_cast<std::size_t>(classes), 0);
    for (std::size_t i : train) {
        const auto y = static_cast<std::size_t>(d.labels[i]);
        for (int k = 0; k < 12; ++k)
            centroid[y][static_cast<std::size_t>(k)] +=
                (feats[i][static_cast<std::size_t>(k)] - mean[static_cast<std::size_t>(k)]) /
                sd[static_cast<std::size_t>(k)];
        count[y]++;
    }
    for (std::size_t c = 0; c < centroid.size(); ++c)
        for (auto& v : centroid[c]) v /= count[c];

    int correct = 0;
    for (std::size_t i : test) {
        double best = 1e300;
        int arg = -1;
        for (int c = 0; c < classes; ++c) {
            double dist = 0.0;
            for (int k = 0; k < 12; ++k) {
                const double v =
                    (feats[i][static_cast<std::size_t>(k)] - mean[static_cast<std::size_t>(k)]) /
                        sd[static_cast<std::size_t>(k)] -
                    centroid[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
                dist += v * v;
            }
            if (dist < best) {
                best = dist;
                arg = c;
            }
        }
        correct += arg == d.labels[i];
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(test.size());
    CHECK(acc > 1.0 / classes + 0.1);  // clearly above chance
}

}  // TEST_SUITE
