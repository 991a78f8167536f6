#pragma once

// nlohmann::json conversions for the simulator's domain types.

#include "chatpcg/simulator.hpp"

#include <nlohmann/json.hpp>

namespace chatpcg {

void to_json(nlohmann::json& j, const Bounds& b);
void from_json(const nlohmann::json& j, Bounds& b);

void to_json(nlohmann::json& j, const CharacterConfig& c);
void from_json(const nlohmann::json& j, CharacterConfig& c);

void to_json(nlohmann::json& j, const TeamConfig& team);
void from_json(const nlohmann::json& j, TeamConfig& team);

void to_json(nlohmann::json& j, const GameConfig& config);
void from_json(const nlohmann::json& j, GameConfig& config);

nlohmann::json bounds_table_to_json(const PropertyBounds& bounds);
PropertyBounds bounds_table_from_json(const nlohmann::json& j, const std::string& field);

}  // namespace chatpcg
