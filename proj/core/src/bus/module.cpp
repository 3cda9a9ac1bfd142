#include "eknit/bus/module.hpp"

#include <cmath>
#include <numbers>

#include "eknit/common.hpp"

namespace eknit::bus {

std::string_view kind_name(ModuleKind kind) {
    return kind == ModuleKind::Imu ? "imu" : "temperature";
}

std::optional<ModuleKind> kind_from_name(std::string_view name) {
    if (name == "imu") return ModuleKind::Imu;
    if (name == "temperature") return ModuleKind::Temperature;
    return std::nullopt;
}

void validate(const ModuleDescriptor& d) {
    if (d.address < 0x08 || d.address > 0x77) {
        throw ValidationError("module address must lie in [0x08, 0x77]");
    }
    if (!(d.mass_kg > 0.0) || !std::isfinite(d.mass_kg)) throw ValidationError("module mass must be > 0");
    if (!(d.footprint_w_mm > 0.0) || !(d.footprint_h_mm > 0.0)) {
        throw ValidationError("module footprint must be > 0");
    }
    if (d.kind == ModuleKind::Temperature &&
        (!(d.sensor.slope_c_per_count != 0.0) || !std::isfinite(d.sensor.slope_c_per_count) ||
         !std::isfinite(d.sensor.intercept_c))) {
        throw ValidationError("temperature sensor map needs a finite, non-zero slope");
    }
}

ModuleDescriptor make_imu(std::uint8_t address) {
    ModuleDescriptor d;
    d.address = address;
    d.kind = ModuleKind::Imu;
    d.registers[reg::kWhoAmI] = reg::kImuWhoAmIValue;
    for (std::uint8_t i = 0; i < reg::kImuDataLength; ++i) {
        d.registers[static_cast<std::uint8_t>(reg::kImuData + i)] = 0;
    }
    return d;
}

ModuleDescriptor make_temperature(std::uint8_t address) {
    ModuleDescriptor d;
    d.address = address;
    d.kind = ModuleKind::Temperature;
    d.registers[reg::kTempData] = 0;
    d.registers[reg::kTempData + 1] = 0;
    d.registers[reg::kTempWhoAmI] = reg::kTempWhoAmIValue;
    return d;
}

ImuSample imu_sample_for_flexion(double angle_deg, double rate_dps) {
    constexpr double g = 9.81;
    const double a = angle_deg * std::numbers::pi / 180.0;
    ImuSample s;
    s.accel_mps2 = {0.0, g * std::sin(a), g * std::cos(a)};
    s.gyro_dps = {rate_dps, 0.0, 0.0};
    return s;
}

std::int32_t temperature_to_counts(const TemperatureSensorMap& map, double temperature_c) {
    return static_cast<std::int32_t>(
        std::lround((temperature_c - map.intercept_c) / map.slope_c_per_count));
}

}  // namespace eknit::bus
