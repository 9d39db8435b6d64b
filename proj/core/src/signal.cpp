#include "cvsei/signal.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cvsei/binio.hpp"
#include "cvsei/errors.hpp"
#include "cvsei/parallel.hpp"

namespace cvsei {

namespace {

// Maximum impairment magnitudes at severity 1. Uncalibrated stand-ins for
// real device spreads; the severity scale only has to order task difficulty.
constexpr double kGainImbSpan = 0.3;
constexpr double kPhaseImbSpan = 0.15;     // rad
constexpr double kCfoSpanHz = 2.0e4;
constexpr double kPhaseNoiseSpan = 0.01;   // rad/sample
constexpr double kPaCoeffSpan = 0.2;
constexpr double kDcSpan = 0.05;

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

EmitterProfile make_emitter_profile(std::uint64_t seed, double severity) {
    require(severity >= 0.0 && severity <= 1.0, Errc::invalid_config,
            "severity must be in [0,1]");
    Rng rng(derive_seed(seed, stream::profile));
    EmitterProfile p;
    p.emitter_id = static_cast<int>(seed);
    p.iq_gain_imbalance = 1.0 + severity * kGainImbSpan * rng.uniform_signed();
    p.iq_phase_imbalance = severity * kPhaseImbSpan * rng.uniform_signed();
    p.cfo_hz = severity * kCfoSpanHz * rng.uniform_signed();
    p.phase_noise_std = severity * kPhaseNoiseSpan * rng.uniform();
    p.pa_coeff3 = severity * kPaCoeffSpan * rng.uniform_signed();
    p.dc_offset = {severity * kDcSpan * rng.uniform_signed(),
                   severity * kDcSpan * rng.uniform_signed()};
    return p;
}

std::vector<std::complex<double>> modulate_burst(const std::vector<int>& payload_bits,
                                                 const BurstParams& params) {
    require(payload_bits.size() == params.payload_bits, Errc::payload_length,
            "payload must be exactly " + std::to_string(params.payload_bits) + " bits, got " +
                std::to_string(payload_bits.size()));
    const double fs_us = params.sample_rate_hz * 1e-6;  // samples per microsecond
    require(fs_us * params.pulse_width_us >= 2.0, Errc::sample_rate_too_low,
            "sample rate gives fewer than 2 samples per preamble pulse");

    std::vector<std::complex<double>> x(params.length, {0.0, 0.0});
    auto paint_pulse = [&](double start_us, double width_us) {
        auto first = static_cast<std::ptrdiff_t>(std::ceil(start_us * fs_us));
        auto last = static_cast<std::ptrdiff_t>(std::ceil((start_us + width_us) * fs_us));
        for (std::ptrdiff_t n = first; n < last; ++n) {
            if (n >= 0 && n < static_cast<std::ptrdiff_t>(params.length))
                x[static_cast<std::size_t>(n)] = {1.0, 0.0};
        }
    };

    for (double off : params.preamble_offsets_us) paint_pulse(off, params.pulse_width_us);
    for (std::size_t i = 0; i < payload_bits.size(); ++i) {
        const double bit_start = params.data_start_us + static_cast<double>(i);
        const double half = payload_bits[i] ? 0.0 : 0.5;
        paint_pulse(bit_start + half, 0.5);
    }
    return x;
}

void apply_impairments(const EmitterProfile& profile, std::vector<std::complex<double>>& x,
                       double sample_rate_hz, Rng& rng) {
    // IQ imbalance: y = alpha*x + beta*conj(x); ideal profile gives alpha=1, beta=0.
    const std::complex<double> rot(std::cos(profile.iq_phase_imbalance),
                                   std::sin(profile.iq_phase_imbalance));
    const std::complex<double> alpha = 0.5 * (1.0 + profile.iq_gain_imbalance * rot);
    const std::complex<double> beta = 0.5 * (1.0 - profile.iq_gain_imbalance * rot);
    for (auto& s : x) s = alpha * s + beta * std::conj(s);

    // Memoryless 3rd-order PA: y = x * (1 + a3*|x|^2).
    if (profile.pa_coeff3 != 0.0) {
        for (auto& s : x) s *= 1.0 + profile.pa_coeff3 * std::norm(s);
    }

    // CFO rotation.
    if (profile.cfo_hz != 0.0) {
        const double w = kTwoPi * profile.cfo_hz / sample_rate_hz;
        double phase = 0.0;
        for (auto& s : x) {
            s *= std::complex<double>(std::cos(phase), std::sin(phase));
            phase += w;
        }
    }

    // Oscillator phase noise as a Wiener process.
    if (profile.phase_noise_std > 0.0) {
        double theta = 0.0;
        for (auto& s : x) {
            theta += profile.phase_noise_std * rng.normal();
            s *= std::complex<double>(std::cos(theta), std::sin(theta));
        }
    }

    if (profile.dc_offset != std::complex<double>(0.0, 0.0)) {
        for (auto& s : x) s += profile.dc_offset;
    }
}

void add_awgn(std::vector<std::complex<double>>& x, double snr_db, Rng& rng) {
    if (std::isinf(snr_db) && snr_db > 0) return;
    double power = 0.0;
    for (const auto& s : x) power += std::norm(s);
    power /= static_cast<double>(x.size());
    const double noise_power = power / std::pow(10.0, snr_db / 10.0);
    const double sigma = std::sqrt(noise_power / 2.0);
    for (auto& s : x) s += std::complex<double>(sigma * rng.normal(), sigma * rng.normal());
}

void normalize_rms(std::vector<std::complex<double>>& x) {
    double power = 0.0;
    for (const auto& s : x) power += std::norm(s);
    power /= static_cast<double>(x.size());
    if (power <= 0.0) return;
    const double scale = 1.0 / std::sqrt(power);
    for (auto& s : x) s *= scale;
}

ComplexSignal synthesize_burst(const EmitterProfile& profile, const std::vector<int>& payload_bits,
                               double snr_db, Rng& rng, const BurstParams& params) {
    auto x = modulate_burst(payload_bits, params);
    apply_impairments(profile, x, params.sample_rate_hz, rng);
    add_awgn(x, snr_db, rng);
    normalize_rms(x);

    ComplexSignal out;
    out.sample_rate_hz = params.sample_rate_hz;
    out.samples.reserve(x.size());
    for (const auto& s : x)
        out.samples.emplace_back(static_cast<float>(s.real()), static_cast<float>(s.imag()));
    return out;
}

LabeledDataset generate_dataset(const std::vector<EmitterProfile>& profiles, int samples_per_class,
                                double snr_db, std::uint64_t seed, const BurstParams& params,
                                DatasetRole role) {
    require(!profiles.empty(), Errc::invalid_config, "generate_dataset: no profiles");
    require(samples_per_class >= 1, Errc::invalid_config,
            "generate_dataset: samples_per_class must be >= 1");

    const std::size_t total = profiles.size() * static_cast<std::size_t>(samples_per_class);
    LabeledDataset d;
    d.class_count = static_cast<int>(profiles.size());
    d.role = role;
    d.signals.resize(total);
    d.labels.resize(total);

    parallel_for(total, [&](std::size_t rec) {
        const std::size_t cls = rec / static_cast<std::size_t>(samples_per_class);
        Rng payload_rng(derive_seed(seed, stream::payload, rec));
        std::vector<int> bits(params.payload_bits);
        for (auto& b : bits) b = static_cast<int>(payload_rng.next() & 1);
        Rng burst_rng(derive_seed(seed, stream::burst, rec));
        d.signals[rec] = synthesize_burst(profiles[cls], bits, snr_db, burst_rng, params);
        d.labels[rec] = static_cast<int>(cls);
    });
    return d;
}

namespace {

constexpr char kMagic[5] = {'C', 'V', 'S', 'E', 'I'};
constexpr char kVersion = '1';

}  // namespace

void write_dataset(const LabeledDataset& d, const std::string& path) {
    require(!d.signals.empty(), Errc::invalid_config, "write_dataset: empty dataset");
    const std::size_t len = d.signals.front().length();
    const double rate = d.signals.front().sample_rate_hz;
    require(d.labels.size() == d.signals.size(), Errc::length_mismatch,
            "write_dataset: label/signal count mismatch");
    for (const auto& s : d.signals) {
        require(s.length() == len && s.sample_rate_hz == rate, Errc::shape_mismatch,
                "write_dataset: signals must share length and sample rate");
    }
    for (int label : d.labels) {
        require(label >= 0 && label < d.class_count, Errc::label_out_of_range,
                "write_dataset: label outside [0, class_count)");
    }

    std::ofstream os(path, std::ios::binary);
    require(os.good(), Errc::corrupt_file, "cannot open for writing: " + path);
    binio::put_bytes(os, kMagic, 5);
    os.put(kVersion);
    binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.signals.size()));
    binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(len));
    binio::put_f64(os, rate);
    binio::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(d.class_count));
    binio::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(d.role));
    for (std::size_t i = 0; i < d.signals.size(); ++i) {
        binio::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(d.labels[i]));
        for (const auto& s : d.signals[i].samples) {
            binio::put_f32(os, s.real());
            binio::put_f32(os, s.imag());
        }
    }
    require(os.good(), Errc::corrupt_file, "write failed: " + path);
}

LabeledDataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), Errc::corrupt_file, "cannot open: " + path);

    char magic[6];
    binio::get_bytes(is, magic, 6, "magic");
    require(std::memcmp(magic, kMagic, 5) == 0, Errc::corrupt_file,
            "bad magic in dataset file: " + path);
    require(magic[5] == kVersion, Errc::corrupt_file,
            "unsupported dataset version byte " + std::to_string(int(magic[5])) + " in " + path);

    const auto count = binio::get_le<std::uint32_t>(is, "count");
    const auto len = binio::get_le<std::uint32_t>(is, "length");
    const double rate = binio::get_f64(is, "sample_rate");
    const auto class_count = binio::get_le<std::uint16_t>(is, "class_count");
    const auto role = binio::get_le<std::uint8_t>(is, "role");
    require(count > 0 && len > 0, Errc::corrupt_file, "empty dataset header: " + path);
    require(class_count > 0, Errc::corrupt_file, "zero class_count: " + path);
    require(role <= 2, Errc::corrupt_file, "invalid role byte: " + path);

    LabeledDataset d;
    d.class_count = class_count;
    d.role = static_cast<DatasetRole>(role);
    d.signals.resize(count);
    d.labels.resize(count);
    std::vector<unsigned char> raw(static_cast<std::size_t>(len) * 8);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto label = binio::get_le<std::uint16_t>(is, "record label");
        require(label < class_count, Errc::corrupt_file, "record label out of range: " + path);
        d.labels[i] = label;
        auto& sig = d.signals[i];
        sig.sample_rate_hz = rate;
        sig.samples.resize(len);
        binio::get_bytes(is, raw.data(), raw.size(), "record samples");
        for (std::uint32_t n = 0; n < len; ++n) {
            std::uint32_t ur = 0, ui = 0;
            for (int b = 0; b < 4; ++b) {
                ur |= static_cast<std::uint32_t>(raw[n * 8 + b]) << (8 * b);
                ui |= static_cast<std::uint32_t>(raw[n * 8 + 4 + b]) << (8 * b);
            }
            float fr, fi;
            std::memcpy(&fr, &ur, 4);
            std::memcpy(&fi, &ui, 4);
            sig.samples[n] = {fr, fi};
        }
    }
    return d;
}

}  // namespace cvsei
