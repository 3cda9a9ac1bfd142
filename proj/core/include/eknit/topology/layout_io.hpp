#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "eknit/topology/layout.hpp"

namespace eknit::topology {

inline constexpr int kLayoutSchema = 1;

nlohmann::json layout_to_json(const GarmentLayout& layout);
GarmentLayout layout_from_json(const nlohmann::json& doc);

std::string save_layout(const GarmentLayout& layout);
GarmentLayout load_layout(const std::string& text);
GarmentLayout load_layout_file(const std::filesystem::path& path);

}  // namespace eknit::topology
