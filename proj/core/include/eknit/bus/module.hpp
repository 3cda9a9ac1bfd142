#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string_view>

namespace eknit::bus {

enum class ModuleKind : std::uint8_t { Imu, Temperature };

std::string_view kind_name(ModuleKind kind);
std::optional<ModuleKind> kind_from_name(std::string_view name);

/// Ground-truth transfer of a temperature sensor: temperature = slope * counts + intercept.
struct TemperatureSensorMap {
    double slope_c_per_count = 0.0625;
    double intercept_c = -10.0;

    bool operator==(const TemperatureSensorMap&) const = default;
};

struct ModuleDescriptor {
    std::uint8_t address = 0x10;
    ModuleKind kind = ModuleKind::Imu;
    double mass_kg = 0.001;
    double footprint_w_mm = 40.0;
    double footprint_h_mm = 15.0;
    std::map<std::uint8_t, std::uint8_t> registers;
    TemperatureSensorMap sensor;

    bool operator==(const ModuleDescriptor&) const = default;
};

void validate(const ModuleDescriptor& d);

/// Synthetic register maps. IMU: WHO_AM_I 0xEA at 0x00, accel/gyro/mag as
/// big-endian int16 at 0x2D..0x3E. Temperature: raw counts as big-endian int16
/// at 0x00..0x01, WHO_AM_I 0x75 at 0x0F.
namespace reg {
inline constexpr std::uint8_t kWhoAmI = 0x00;
inline constexpr std::uint8_t kImuWhoAmIValue = 0xEA;
inline constexpr std::uint8_t kImuData = 0x2D;
inline constexpr std::uint8_t kImuDataLength = 18;
inline constexpr std::uint8_t kTempData = 0x00;
inline constexpr std::uint8_t kTempWhoAmI = 0x0F;
inline constexpr std::uint8_t kTempWhoAmIValue = 0x75;

inline constexpr double kAccelLsbPerMps2 = 16384.0 / 9.80665;
inline constexpr double kGyroLsbPerDps = 131.0;
inline constexpr double kMagLsbPerUt = 1.0 / 0.15;
}  // namespace reg

ModuleDescriptor make_imu(std::uint8_t address);
ModuleDescriptor make_temperature(std::uint8_t address);

struct ImuSample {
    std::array<double, 3> accel_mps2{0.0, 0.0, 9.81};
    std::array<double, 3> gyro_dps{0.0, 0.0, 0.0};
    std::array<double, 3> mag_ut{30.0, 0.0, -40.0};

    bool operator==(const ImuSample&) const = default;
};

/// Sample of an IMU riding on the forearm at `angle_deg` of flexion, turning
/// at `rate_dps` about its x axis.
ImuSample imu_sample_for_flexion(double angle_deg, double rate_dps);

/// Raw counts a sensor reports at `temperature_c`: inverse map, rounded.
std::int32_t temperature_to_counts(const TemperatureSensorMap& map, double temperature_c);

}  // namespace eknit::bus
