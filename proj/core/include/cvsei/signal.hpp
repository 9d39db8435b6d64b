#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "cvsei/rng.hpp"

namespace cvsei {

// Hardware fingerprint of one synthetic transmitter. All impairment fields
// are zero/ideal at severity 0 and scale linearly in magnitude with severity.
struct EmitterProfile {
    int emitter_id = 0;
    double iq_gain_imbalance = 1.0;   // linear I/Q gain ratio, ideal 1
    double iq_phase_imbalance = 0.0;  // radians, ideal 0
    double cfo_hz = 0.0;              // residual carrier frequency offset
    double phase_noise_std = 0.0;     // radians per sample (random-walk step)
    double pa_coeff3 = 0.0;           // 3rd-order amplifier nonlinearity, |.| < 1
    std::complex<double> dc_offset{0.0, 0.0};
};

// One burst of complex baseband IQ samples, RMS-normalized to 1.
struct ComplexSignal {
    std::vector<std::complex<float>> samples;
    double sample_rate_hz = 0.0;

    std::size_t length() const { return samples.size(); }
};

enum class DatasetRole : std::uint8_t { auxiliary = 0, fewshot_train = 1, test = 2 };

struct LabeledDataset {
    std::vector<ComplexSignal> signals;
    std::vector<int> labels;
    int class_count = 0;
    DatasetRole role = DatasetRole::auxiliary;
    std::string provenance;  // config digest; in-memory metadata, not persisted

    std::size_t size() const { return signals.size(); }
};

// Burst timing. The modulated burst is a Mode-S-style frame: four 0.5 us
// preamble pulses at fixed offsets, then a 112 us PPM data block (one bit per
// microsecond, pulse in the first half for a 1 bit, second half for a 0).
// The window keeps the first `length` samples, so low sample rates truncate
// the tail of the payload.
struct BurstParams {
    std::size_t length = 512;
    double sample_rate_hz = 8.0e6;  // 8 samples/us desk default; 50e6 for the full frame
    double preamble_offsets_us[4] = {0.0, 1.0, 3.5, 4.5};
    double pulse_width_us = 0.5;
    double data_start_us = 8.0;
    std::size_t payload_bits = 112;
};

// Deterministic profile from (seed, severity). Severity 0 is the ideal
// transmitter; distinct seeds at severity > 0 differ in the impairment draw.
EmitterProfile make_emitter_profile(std::uint64_t seed, double severity);

// Clean unit-amplitude PPM envelope for the given payload.
// Throws: payload_length, sample_rate_too_low.
std::vector<std::complex<double>> modulate_burst(const std::vector<int>& payload_bits,
                                                 const BurstParams& params);

// Transmitter chain applied in fixed order:
// IQ imbalance -> PA nonlinearity -> CFO rotation -> phase noise -> DC offset.
// The order is part of the contract; reordering changes the waveform.
void apply_impairments(const EmitterProfile& profile, std::vector<std::complex<double>>& x,
                       double sample_rate_hz, Rng& rng);

// Adds complex AWGN sized against the current mean power of x. Infinite
// snr_db is a no-op (rng untouched).
void add_awgn(std::vector<std::complex<double>>& x, double snr_db, Rng& rng);

// Scales x to RMS power 1. No-op on all-zero input.
void normalize_rms(std::vector<std::complex<double>>& x);

// Full synthesis pipeline: modulate, impair, add noise, normalize.
ComplexSignal synthesize_burst(const EmitterProfile& profile, const std::vector<int>& payload_bits,
                               double snr_db, Rng& rng, const BurstParams& params = {});

// |profiles| x samples_per_class bursts with fresh random payloads, labels
// assigned by profile position. Bursts use independent substreams derived
// from (seed, record index), so generation parallelizes over records.
LabeledDataset generate_dataset(const std::vector<EmitterProfile>& profiles, int samples_per_class,
                                double snr_db, std::uint64_t seed, const BurstParams& params = {},
                                DatasetRole role = DatasetRole::auxiliary);

// Dataset file format (little-endian):
//   magic   "CVSEI" + version char '1'
//   u32     record count
//   u32     samples per record
//   f64     sample rate (Hz)
//   u16     class count
//   u8      role
//   records u16 label, then length x 2 f32 interleaved I,Q
void write_dataset(const LabeledDataset& d, const std::string& path);
LabeledDataset read_dataset(const std::string& path);

}  // namespace cvsei
