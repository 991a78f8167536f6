#include "chatpcg/json_io.hpp"

#include <fstream>
#include <sstream>

namespace chatpcg {

using nlohmann::json;
using nlohmann::ordered_json;

void to_json(json& j, const Bounds& b) { j = json::array({b.min, b.max}); }

void from_json(const json& j, Bounds& b) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("bounds", "bounds must be a [min, max] array");
    b.min = j.at(0).get<double>();
    b.max = j.at(1).get<double>();
}

void to_json(json& j, const CharacterConfig& c) {
    j = json::object();
    j["agent_id"] = c.agent_id;
    j["role"] = to_string(c.role);
    j["skill_type"] = to_string(c.skill_type);
    json props = json::object();
    for (Property p : kAllProperties) props[std::string(property_name(p))] = c[p];
    j["properties"] = std::move(props);
}

void from_json(const json& j, CharacterConfig& c) {
    c.agent_id = j.at("agent_id").get<int>();
    c.role = role_from_string(j.at("role").get<std::string>());
    c.skill_type = skill_from_string(j.at("skill_type").get<std::string>());
    const json& props = j.at("properties");
    for (Property p : kAllProperties) {
        const std::string name(property_name(p));
        if (!props.contains(name)) throw ConfigError("properties." + name, "missing property " + name);
        c[p] = props.at(name).get<double>();
    }
}

void to_json(json& j, const TeamConfig& team) {
    j = json::object();
    j["players"] = json::array();
    for (const auto& p : team.players) j["players"].push_back(p);
    j["boss"] = team.boss;
}

void from_json(const json& j, TeamConfig& team) {
    const json& players = j.at("players");
    if (!players.is_array() || players.size() != kNumPlayers) {
        throw ConfigError("players", "a team needs exactly 4 players");
    }
    for (std::size_t i = 0; i < kNumPlayers; ++i) team.players[i] = players.at(i).get<CharacterConfig>();
    team.boss = j.at("boss").get<CharacterConfig>();
}

json bounds_table_to_json(const PropertyBounds& bounds) {
    json j = json::object();
    for (Property p : kAllProperties) j[std::string(property_name(p))] = bounds[index_of(p)];
    return j;
}

PropertyBounds bounds_table_from_json(const json& j, const std::string& field) {
    PropertyBounds out{};
    for (Property p : kAllProperties) {
        const std::string name(property_name(p));
        if (!j.contains(name)) throw ConfigError(field + "." + name, "missing bounds for " + field + "." + name);
        out[index_of(p)] = j.at(name).get<Bounds>();
    }
    return out;
}

void to_json(json& j, const GameConfig& c) {
    j = json::object();
    j["arena_size"] = c.arena_size;
    j["max_ticks"] = c.max_ticks;
    j["player_bounds"] = bounds_table_to_json(c.player_bounds);
    j["boss_bounds"] = bounds_table_to_json(c.boss_bounds);
    j["melee_range"] = c.melee_range;
    j["ranged_range"] = c.ranged_range;
    j["default_boss"] = c.default_boss;
    j["damage_variance"] = c.damage_variance;
    j["spawn_jitter"] = c.spawn_jitter;
    j["rng_seed"] = c.rng_seed;
}

void from_json(const json& j, GameConfig& c) {
    c = GameConfig::defaults();
    if (j.contains("arena_size")) c.arena_size = j.at("arena_size").get<double>();
    if (j.contains("max_ticks")) c.max_ticks = j.at("max_ticks").get<int>();
    if (j.contains("player_bounds")) c.player_bounds = bounds_table_from_json(j.at("player_bounds"), "player_bounds");
    if (j.contains("boss_bounds")) c.boss_bounds = bounds_table_from_json(j.at("boss_bounds"), "boss_bounds");
    if (j.contains("melee_range")) c.melee_range = j.at("melee_range").get<Bounds>();
    if (j.contains("ranged_range")) c.ranged_range = j.at("ranged_range").get<Bounds>();
    if (j.contains("default_boss")) c.default_boss = j.at("default_boss").get<CharacterConfig>();
    if (j.contains("damage_variance")) c.damage_variance = j.at("damage_variance").get<double>();
    if (j.contains("spawn_jitter")) c.spawn_jitter = j.at("spawn_jitter").get<double>();
    if (j.contains("rng_seed")) c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
}

GameConfig load_game_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("game_config", "cannot open game config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("game_config", "malformed game config " + path.string() + ": " + e.what());
    }
    GameConfig c = j.get<GameConfig>();
    c.validate();
    return c;
}

void save_game_config(const GameConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << json(config).dump(2) << "\n";
}

// ---------------------------------------------------------------------------

std::string playtest_row_to_json(const PlaytestRow& row) {
    ordered_json j = ordered_json::object();
    const auto& names = playtest_variable_names();
    for (std::size_t i = 0; i < kNumPlaytestVariables; ++i) j[names[i]] = row.values[i];
    j["win"] = row.win;
    j["episode_ticks"] = row.episode_ticks;
    j["seed"] = row.seed;
    return j.dump();
}

PlaytestRow playtest_row_from_json(std::string_view line) {
    const json j = json::parse(line);
    PlaytestRow row;
    const auto& names = playtest_variable_names();
    for (std::size_t i = 0; i < kNumPlaytestVariables; ++i) {
        if (!j.contains(names[i])) throw std::runtime_error("playtest row is missing " + names[i]);
        row.values[i] = j.at(names[i]).get<double>();
    }
    row.win = j.at("win").get<bool>();
    row.episode_ticks = j.at("episode_ticks").get<int>();
    row.seed = j.at("seed").get<std::uint64_t>();
    return row;
}

void write_playtest_jsonl(const std::vector<PlaytestRow>& rows, std::ostream& out) {
    for (const PlaytestRow& r : rows) out << playtest_row_to_json(r) << '\n';
}

void write_playtest_jsonl(const std::vector<PlaytestRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_playtest_jsonl(rows, out);
}

std::vector<PlaytestRow> read_playtest_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    std::vector<PlaytestRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            rows.push_back(playtest_row_from_json(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

}  // namespace chatpcg
