#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace eknit::signal {

struct Waveform {
    double sample_rate_hz = 0.0;
    std::vector<double> samples;

    double dt() const { return 1.0 / sample_rate_hz; }
    std::size_t size() const { return samples.size(); }
    double time_at(std::size_t i) const { return static_cast<double>(i) / sample_rate_hz; }

    bool operator==(const Waveform&) const = default;
};

/// Electrical parameters of one conductive line and its receiver.
struct LineParams {
    double ohm_per_m = 20.0;
    double capacitance_f_per_m = 100e-12;
    double load_capacitance_f = 50e-12;
    double supply_v = 5.0;
    double rise_time_s = 1e-6;
    double termination_ohm = 100.0;

    bool operator==(const LineParams&) const = default;
};

void validate(const LineParams& lp);

struct EyeReport {
    double min_high_v = 0.0;
    double max_low_v = 0.0;
    double margin_v = 0.0;
    double threshold_v = 0.0;
    bool decodable = false;
};

/// Trapezoidal NRZ waveform with levels {0, swing}. The first bit sets the
/// initial level; each transition ramps linearly over `rise_time_s` starting
/// at the bit boundary. Requires sample_rate >= 20 x bitrate.
Waveform generate_bit_waveform(std::span<const std::uint8_t> bits, double bitrate_hz,
                               double swing_v, double sample_rate_hz, double rise_time_s = 1e-6);

/// Lumped line: resistive division against the receiver termination, then a
/// single-pole low-pass with tau = R * (length * C_per_m + C_load). Starts in
/// steady state. A zero-resistance path is the identity.
Waveform attenuate(const Waveform& w, double path_resistance_ohm, double path_length_m,
                   const LineParams& lp);

struct DifferentialPair {
    Waveform plus;
    Waveform minus;
};

/// plus = cm + w/2, minus = cm - w/2.
DifferentialPair differential_encode(const Waveform& w, double common_mode_v);

/// Comparator on (plus - minus) with a hysteresis band of +/- hysteresis/2
/// around zero; output samples are exactly 0.0 or 1.0.
Waveform differential_decode(const Waveform& plus, const Waveform& minus, double hysteresis_v);

/// Samples each bit period at its midpoint and splits the samples into high
/// and low clusters around the midpoint of their range.
EyeReport eye_margin(const Waveform& w, double bitrate_hz, double threshold_v);

/// Same, but classifies each mid-bit sample by the bit that was sent.
EyeReport eye_margin(const Waveform& w, double bitrate_hz, std::span<const std::uint8_t> sent_bits,
                     double threshold_v);

/// Mid-bit samples of `w`, one per complete bit period.
std::vector<double> mid_bit_samples(const Waveform& w, double bitrate_hz);

Waveform difference(const Waveform& a, const Waveform& b);
Waveform scaled(const Waveform& w, double gain, double offset = 0.0);
double swing(const Waveform& w);

}  // namespace eknit::signal
