#include "eknit/signal/link.hpp"

#include <cmath>

#include "eknit/common.hpp"
#include "eknit/random.hpp"

namespace eknit::signal {

namespace {

Waveform bipolar_bits(std::span<const std::uint8_t> bits, double bitrate_hz, const LinkConfig& cfg) {
    const Waveform w = generate_bit_waveform(bits, bitrate_hz, cfg.line.supply_v, cfg.sample_rate_hz,
                                             cfg.line.rise_time_s);
    return scaled(w, 1.0, -0.5 * cfg.line.supply_v);
}

void add_noise(DifferentialPair& pair, const LinkNoise& noise, Rng& rng) {
    if (noise.leg_sigma_v == 0.0 && noise.common_mode_sigma_v == 0.0) return;
    for (std::size_t i = 0; i < pair.plus.size(); ++i) {
        const double cm = noise.common_mode_sigma_v * rng.normal();
        pair.plus.samples[i] += cm + noise.leg_sigma_v * rng.normal();
        pair.minus.samples[i] += cm + noise.leg_sigma_v * rng.normal();
    }
}

Waveform through_pair(const Waveform& bipolar, const PairPath& path, const LinkConfig& cfg,
                      const LinkNoise& noise, Rng& rng) {
    auto pair = differential_encode(bipolar, cfg.common_mode_v);
    pair.plus = attenuate(pair.plus, path.plus.resistance_ohm, path.plus.length_m, cfg.line);
    pair.minus = attenuate(pair.minus, path.minus.resistance_ohm, path.minus.length_m, cfg.line);
    add_noise(pair, noise, rng);
    return differential_decode(pair.plus, pair.minus, cfg.hysteresis_v);
}

}  // namespace

void validate(const LinkConfig& cfg) {
    validate(cfg.line);
    if (!(cfg.bitrate_hz > 0.0) || !(cfg.sample_rate_hz >= 40.0 * cfg.bitrate_hz)) {
        throw ValidationError("link needs bitrate > 0 and sample rate >= 40 x bitrate");
    }
    if (!(cfg.hysteresis_v >= 0.0)) throw ValidationError("hysteresis must be >= 0");
    // At or above the supply nothing could ever clear the threshold.
    if (!(cfg.threshold_fraction >= 0.0 && cfg.threshold_fraction < 1.0)) {
        throw ValidationError("threshold fraction must be in [0, 1)");
    }
}

std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes) {
    std::vector<std::uint8_t> bits;
    bits.reserve(bytes.size() * 8);
    for (std::uint8_t b : bytes) {
        for (int i = 7; i >= 0; --i) bits.push_back(static_cast<std::uint8_t>((b >> i) & 1U));
    }
    return bits;
}

std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
    }
    return bytes;
}

std::vector<std::uint8_t> probe_pattern() {
    constexpr std::uint8_t bytes[] = {0xA5, 0x5A};
    return bytes_to_bits(bytes);
}

Waveform receive_difference(const Waveform& bipolar, const PairPath& path, const LinkConfig& cfg) {
    const auto pair = differential_encode(bipolar, cfg.common_mode_v);
    return difference(attenuate(pair.plus, path.plus.resistance_ohm, path.plus.length_m, cfg.line),
                      attenuate(pair.minus, path.minus.resistance_ohm, path.minus.length_m, cfg.line));
}

Waveform probe_waveform(const PairPath& path, const LinkConfig& cfg) {
    return receive_difference(bipolar_bits(probe_pattern(), cfg.bitrate_hz, cfg), path, cfg);
}

EyeReport pair_eye(const PairPath& path, const LinkConfig& cfg) {
    const auto bits = probe_pattern();
    const Waveform diff = receive_difference(bipolar_bits(bits, cfg.bitrate_hz, cfg), path, cfg);
    return eye_margin(diff, cfg.bitrate_hz, bits, cfg.decision_threshold_v());
}

BitTransfer transfer_bits(std::span<const std::uint8_t> bits, const PairPath& sda,
                          const PairPath& scl, const LinkConfig& cfg, const LinkNoise& noise) {
    validate(cfg);
    BitTransfer out;
    if (bits.empty()) return out;

    // SCL: low for the first half of each bit, high for the second.
    std::vector<std::uint8_t> clock(bits.size() * 2);
    for (std::size_t i = 0; i < clock.size(); ++i) clock[i] = static_cast<std::uint8_t>(i % 2);

    Rng rng(noise.seed);
    const Waveform sda_tx = bipolar_bits(bits, cfg.bitrate_hz, cfg);
    const Waveform scl_tx = bipolar_bits(clock, 2.0 * cfg.bitrate_hz, cfg);

    auto sda_pair = differential_encode(sda_tx, cfg.common_mode_v);
    sda_pair.plus = attenuate(sda_pair.plus, sda.plus.resistance_ohm, sda.plus.length_m, cfg.line);
    sda_pair.minus = attenuate(sda_pair.minus, sda.minus.resistance_ohm, sda.minus.length_m, cfg.line);
    add_noise(sda_pair, noise, rng);
    const Waveform sda_logic = differential_decode(sda_pair.plus, sda_pair.minus, cfg.hysteresis_v);
    const Waveform scl_logic = through_pair(scl_tx, scl, cfg, noise, rng);

    if (bits.size() >= 8) {
        out.sda_eye = eye_margin(difference(sda_pair.plus, sda_pair.minus), cfg.bitrate_hz, bits,
                                 cfg.decision_threshold_v());
    }
    for (std::size_t i = 1; i < scl_logic.size() && out.received.size() < bits.size(); ++i) {
        if (scl_logic.samples[i - 1] == 0.0 && scl_logic.samples[i] == 1.0) {
            out.received.push_back(static_cast<std::uint8_t>(sda_logic.samples[i] == 1.0));
        }
    }
    return out;
}

}  // namespace eknit::signal
