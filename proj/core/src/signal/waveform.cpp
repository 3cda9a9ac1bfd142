#include "eknit/signal/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "eknit/common.hpp"

namespace eknit::signal {

namespace {

constexpr double kEdgeEps = 1e-9;

void require_rate(double sample_rate_hz) {
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
        throw ValidationError("sample rate must be > 0");
    }
}

std::size_t complete_bits(const Waveform& w, double bitrate_hz) {
    return static_cast<std::size_t>(
        std::floor(static_cast<double>(w.size()) * bitrate_hz / w.sample_rate_hz + kEdgeEps));
}

EyeReport finish(double min_high, double max_low, double threshold_v) {
    EyeReport r;
    r.min_high_v = min_high;
    r.max_low_v = max_low;
    r.margin_v = min_high - max_low;
    r.threshold_v = threshold_v;
    r.decodable = r.margin_v > threshold_v;
    return r;
}

}  // namespace

void validate(const LineParams& lp) {
    for (double v : {lp.ohm_per_m, lp.capacitance_f_per_m, lp.load_capacitance_f, lp.supply_v,
                     lp.rise_time_s, lp.termination_ohm}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ValidationError("line parameters must all be finite and > 0");
        }
    }
}

Waveform generate_bit_waveform(std::span<const std::uint8_t> bits, double bitrate_hz,
                               double swing_v, double sample_rate_hz, double rise_time_s) {
    require_rate(sample_rate_hz);
    if (!(bitrate_hz > 0.0)) throw ValidationError("bitrate must be > 0");
    if (sample_rate_hz < 20.0 * bitrate_hz) {
        throw ValidationError("undersampled: sample rate must be at least 20 x bitrate");
    }
    if (!(rise_time_s >= 0.0) || rise_time_s >= 1.0 / bitrate_hz) {
        throw ValidationError("rise time must lie in [0, bit period)");
    }

    Waveform w{sample_rate_hz, {}};
    if (bits.empty()) return w;
    const double samples_per_bit = sample_rate_hz / bitrate_hz;
    const auto n = static_cast<std::size_t>(
        std::ceil(static_cast<double>(bits.size()) * samples_per_bit - kEdgeEps));
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = w.time_at(i);
        const auto k = std::min(bits.size() - 1,
                                static_cast<std::size_t>(std::floor(t * bitrate_hz + kEdgeEps)));
        const double level = bits[k] ? swing_v : 0.0;
        double v = level;
        if (k > 0 && bits[k] != bits[k - 1] && rise_time_s > 0.0) {
            const double since_edge = std::max(0.0, t - static_cast<double>(k) / bitrate_hz);
            if (since_edge < rise_time_s) {
                const double prev = bits[k - 1] ? swing_v : 0.0;
                v = prev + (level - prev) * (since_edge / rise_time_s);
            }
        }
        w.samples[i] = v;
    }
    return w;
}

Waveform attenuate(const Waveform& w, double path_resistance_ohm, double path_length_m,
                   const LineParams& lp) {
    if (!(path_resistance_ohm >= 0.0) || !std::isfinite(path_resistance_ohm)) {
        throw ValidationError("path resistance must be finite and >= 0");
    }
    if (!(path_length_m >= 0.0)) throw ValidationError("path length must be >= 0");
    if (path_resistance_ohm == 0.0 || w.samples.empty()) return w;
    require_rate(w.sample_rate_hz);

    const double gain = lp.termination_ohm / (lp.termination_ohm + path_resistance_ohm);
    const double tau =
        path_resistance_ohm * (path_length_m * lp.capacitance_f_per_m + lp.load_capacitance_f);
    const double alpha = tau > 0.0 ? -std::expm1(-w.dt() / tau) : 1.0;

    Waveform out{w.sample_rate_hz, std::vector<double>(w.size())};
    double y = gain * w.samples.front();
    for (std::size_t i = 0; i < w.size(); ++i) {
        y += alpha * (gain * w.samples[i] - y);
        out.samples[i] = y;
    }
    return out;
}

DifferentialPair differential_encode(const Waveform& w, double common_mode_v) {
    DifferentialPair pair{{w.sample_rate_hz, std::vector<double>(w.size())},
                          {w.sample_rate_hz, std::vector<double>(w.size())}};
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double half = 0.5 * w.samples[i];
        pair.plus.samples[i] = common_mode_v + half;
        pair.minus.samples[i] = common_mode_v - half;
    }
    return pair;
}

Waveform differential_decode(const Waveform& plus, const Waveform& minus, double hysteresis_v) {
    if (plus.size() != minus.size() || plus.sample_rate_hz != minus.sample_rate_hz) {
        throw ValidationError("differential legs differ in length or sample rate");
    }
    if (!(hysteresis_v >= 0.0)) throw ValidationError("hysteresis must be >= 0");
    Waveform out{plus.sample_rate_hz, std::vector<double>(plus.size())};
    if (plus.samples.empty()) return out;
    const double band = 0.5 * hysteresis_v;
    bool state = (plus.samples[0] - minus.samples[0]) > 0.0;
    for (std::size_t i = 0; i < plus.size(); ++i) {
        const double d = plus.samples[i] - minus.samples[i];
        if (state && d < -band) state = false;
        if (!state && d > band) state = true;
        out.samples[i] = state ? 1.0 : 0.0;
    }
    return out;
}

std::vector<double> mid_bit_samples(const Waveform& w, double bitrate_hz) {
    require_rate(w.sample_rate_hz);
    if (!(bitrate_hz > 0.0)) throw ValidationError("bitrate must be > 0");
    const std::size_t nbits = complete_bits(w, bitrate_hz);
    std::vector<double> mids;
    mids.reserve(nbits);
    const double samples_per_bit = w.sample_rate_hz / bitrate_hz;
    for (std::size_t k = 0; k < nbits; ++k) {
        const auto idx = static_cast<std::size_t>(
            std::floor((static_cast<double>(k) + 0.5) * samples_per_bit + kEdgeEps));
        mids.push_back(w.samples[std::min(idx, w.size() - 1)]);
    }
    return mids;
}

EyeReport eye_margin(const Waveform& w, double bitrate_hz, double threshold_v) {
    const auto mids = mid_bit_samples(w, bitrate_hz);
    if (mids.size() < 8) throw ValidationError("eye margin needs at least 8 bit periods");
    const auto [lo, hi] = std::minmax_element(mids.begin(), mids.end());
    if (*hi == *lo) return finish(*lo, *lo, threshold_v);
    const double split = 0.5 * (*lo + *hi);
    double min_high = std::numeric_limits<double>::infinity();
    double max_low = -std::numeric_limits<double>::infinity();
    for (double v : mids) {
        if (v > split) {
            min_high = std::min(min_high, v);
        } else {
            max_low = std::max(max_low, v);
        }
    }
    return finish(min_high, max_low, threshold_v);
}

EyeReport eye_margin(const Waveform& w, double bitrate_hz, std::span<const std::uint8_t> sent_bits,
                     double threshold_v) {
    const auto mids = mid_bit_samples(w, bitrate_hz);
    const std::size_t n = std::min(mids.size(), sent_bits.size());
    if (n < 8) throw ValidationError("eye margin needs at least 8 bit periods");
    double min_high = std::numeric_limits<double>::infinity();
    double max_low = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        if (sent_bits[k]) {
            min_high = std::min(min_high, mids[k]);
        } else {
            max_low = std::max(max_low, mids[k]);
        }
    }
    if (!std::isfinite(min_high) || !std::isfinite(max_low)) {
        throw ValidationError("eye margin needs both high and low bits");
    }
    return finish(min_high, max_low, threshold_v);
}

Waveform difference(const Waveform& a, const Waveform& b) {
    if (a.size() != b.size() || a.sample_rate_hz != b.sample_rate_hz) {
        throw ValidationError("waveforms differ in length or sample rate");
    }
    Waveform out{a.sample_rate_hz, std::vector<double>(a.size())};
    for (std::size_t i = 0; i < a.size(); ++i) out.samples[i] = a.samples[i] - b.samples[i];
    return out;
}

Waveform scaled(const Waveform& w, double gain, double offset) {
    Waveform out{w.sample_rate_hz, w.samples};
    for (auto& v : out.samples) v = gain * v + offset;
    return out;
}

double swing(const Waveform& w) {
    if (w.samples.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(w.samples.begin(), w.samples.end());
    return *hi - *lo;
}

}  // namespace eknit::signal
