#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eknit {

/// One of the six parallel threads in a channel group. Values match the
/// physical ordering from top (VCC) to bottom (GND).
enum class Channel : std::uint8_t {
    Vcc = 1,
    SdaP = 2,
    SdaN = 3,
    SclP = 4,
    SclN = 5,
    Gnd = 6,
};

inline constexpr std::size_t kChannelCount = 6;

inline constexpr std::array<Channel, kChannelCount> kAllChannels{
    Channel::Vcc, Channel::SdaP, Channel::SdaN, Channel::SclP, Channel::SclN, Channel::Gnd};

constexpr std::size_t channel_slot(Channel c) { return static_cast<std::size_t>(c) - 1; }

constexpr bool is_power_channel(Channel c) { return c == Channel::Vcc || c == Channel::Gnd; }
constexpr bool is_signal_channel(Channel c) { return !is_power_channel(c); }

constexpr bool are_adjacent(Channel a, Channel b) {
    const int d = static_cast<int>(a) - static_cast<int>(b);
    return d == 1 || d == -1;
}

constexpr std::optional<Channel> channel_from_index(int index) {
    if (index < 1 || index > static_cast<int>(kChannelCount)) return std::nullopt;
    return static_cast<Channel>(index);
}

constexpr std::string_view channel_name(Channel c) {
    switch (c) {
        case Channel::Vcc: return "VCC";
        case Channel::SdaP: return "SDA+";
        case Channel::SdaN: return "SDA-";
        case Channel::SclP: return "SCL+";
        case Channel::SclN: return "SCL-";
        case Channel::Gnd: return "GND";
    }
    return "?";
}

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input that violates a documented precondition or invariant.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Document declares an unsupported schema or carries unknown fields.
class SchemaError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Document is not parseable (truncated, not JSON, wrong types).
class MalformedError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

class IoError : public Error {
  public:
    using Error::Error;
};

}  // namespace eknit
