#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "eknit/signal/waveform.hpp"

namespace eknit::signal {

/// Everything needed to push logic through a differential pair.
struct LinkConfig {
    LineParams line;
    double bitrate_hz = 100e3;
    double sample_rate_hz = 10e6;
    double common_mode_v = 2.5;
    double hysteresis_v = 0.05;
    double threshold_fraction = 0.2;

    double decision_threshold_v() const { return threshold_fraction * line.supply_v; }
    bool operator==(const LinkConfig&) const = default;
};

void validate(const LinkConfig& cfg);

struct LegPath {
    double resistance_ohm = 0.0;
    double length_m = 0.0;
};

/// The two legs of a pair travel on different threads and may differ.
struct PairPath {
    LegPath plus;
    LegPath minus;
};

struct LinkNoise {
    double leg_sigma_v = 0.0;          ///< independent per leg
    double common_mode_sigma_v = 0.0;  ///< identical on both legs
    std::uint64_t seed = 0;
};

std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits);

/// Alternating probe pattern used for per-path eye measurements (16 bits).
std::vector<std::uint8_t> probe_pattern();

/// Receiver-side difference waveform of `bipolar` sent over `path`.
Waveform receive_difference(const Waveform& bipolar, const PairPath& path, const LinkConfig& cfg);

/// Receiver difference of the probe pattern; what pair_eye measures.
Waveform probe_waveform(const PairPath& path, const LinkConfig& cfg);

/// Eye of the probe pattern after crossing `path`; noise-free.
EyeReport pair_eye(const PairPath& path, const LinkConfig& cfg);

struct BitTransfer {
    std::vector<std::uint8_t> received;
    EyeReport sda_eye;
};

/// Bit-accurate transfer: SDA carries `bits`, SCL a clock that rises at each
/// mid-bit. Both are encoded, attenuated leg by leg, disturbed by `noise`, and
/// decoded; SDA is latched on every decoded rising edge of SCL.
BitTransfer transfer_bits(std::span<const std::uint8_t> bits, const PairPath& sda,
                          const PairPath& scl, const LinkConfig& cfg, const LinkNoise& noise = {});

}  // namespace eknit::signal
