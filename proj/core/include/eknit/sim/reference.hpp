#pragma once

#include <string>
#include <vector>

#include "eknit/signal/link.hpp"
#include "eknit/topology/layout.hpp"

namespace eknit::sim {

struct Scenario;

/// Flat pattern of a long-sleeved top: two sleeve groups, five torso rows of
/// three short groups each, and full-width belt and hem groups, bridged by
/// three pairs of strips. The hub sits at the right end of the hem, 1.53 m of
/// thread away from the left wrist.
topology::GarmentLayout reference_layout();

inline constexpr const char* kReferenceHub = "hem_r";

/// Sites of the attenuation sweep, Positions 1..9 in order. Position 1 (the
/// right wrist) transmits; the others run along both sleeves and to the hem
/// corner, ending at the far wrist.
std::vector<std::string> attenuation_positions();

struct AttenuationPoint {
    int position = 0;
    std::string site;
    signal::PairPath scl;  ///< from Position 1
    signal::EyeReport eye;
};

/// Noise-free SCL eye at every attenuation position, seen from Position 1.
std::vector<AttenuationPoint> attenuation_sweep(const topology::GarmentLayout& layout,
                                                const signal::LinkConfig& link = {});

/// Five modules (left wrist, right wrist, back, chest, waist) and one motion
/// event per kind, `trials` trials each; modules are re-seated between trials.
Scenario shake_test_scenario(int trials = 50);

/// Five skin-temperature modules (upper arm, wrist, stomach, below the
/// collarbone, waist), polled twice.
Scenario skin_temperature_scenario();

}  // namespace eknit::sim
