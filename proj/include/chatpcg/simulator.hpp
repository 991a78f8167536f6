#pragma once

// Tick-based boss-raid combat simulator with embedded heuristic agents.
//
// Four players spawn along the bottom edge of a square arena and a single
// boss spawns at the top. Every agent runs the same heuristic: close in on
// its target until within `range`, then cast (cast_time ticks), land a hit
// worth damage x (1 +/- variance) x (1 - target armor), and wait `cooldown`
// ticks. Players always target the boss; the boss re-targets the nearest
// living player every tick. An episode ends on boss death (win), team wipe,
// or max_ticks.

#include "chatpcg/seed.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chatpcg {

enum class Property : std::uint8_t { MaxHealth, Armor, Speed, Cooldown, CastTime, Range, Damage };

inline constexpr std::size_t kNumProperties = 7;
inline constexpr std::size_t kNumPlayers = 4;
inline constexpr int kBossAgentId = 4;

inline constexpr std::array<std::string_view, kNumProperties> kPropertyNames = {
    "max_health", "armor", "speed", "cooldown", "cast_time", "range", "damage"};

inline constexpr std::array<Property, kNumProperties> kAllProperties = {
    Property::MaxHealth, Property::Armor,    Property::Speed, Property::Cooldown,
    Property::CastTime,  Property::Range,    Property::Damage};

constexpr std::size_t index_of(Property p) { return static_cast<std::size_t>(p); }
std::string_view property_name(Property p);
std::optional<Property> property_from_name(std::string_view name);

enum class Role : std::uint8_t { Player, Boss };
enum class SkillType : std::uint8_t { Melee, Ranged };

std::string_view to_string(Role role);
std::string_view to_string(SkillType skill);
Role role_from_string(std::string_view text);
SkillType skill_from_string(std::string_view text);

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct Bounds {
    double min = 0.0;
    double max = 1.0;

    double width() const { return max - min; }
    double clamp(double v) const { return v < min ? min : (v > max ? max : v); }
    bool contains(double v) const { return v >= min && v <= max; }
    double normalize(double v) const { return (v - min) / (max - min); }
    double denormalize(double u) const { return min + u * (max - min); }

    friend bool operator==(const Bounds&, const Bounds&) = default;
};

using PropertyBounds = std::array<Bounds, kNumProperties>;
using PropertyValues = std::array<double, kNumProperties>;

struct CharacterConfig {
    int agent_id = 0;
    Role role = Role::Player;
    SkillType skill_type = SkillType::Melee;
    PropertyValues properties{};

    double operator[](Property p) const { return properties[index_of(p)]; }
    double& operator[](Property p) { return properties[index_of(p)]; }

    friend bool operator==(const CharacterConfig&, const CharacterConfig&) = default;
};

struct TeamConfig {
    std::array<CharacterConfig, kNumPlayers> players{};
    CharacterConfig boss{};

    friend bool operator==(const TeamConfig&, const TeamConfig&) = default;
};

struct GameConfig {
    double arena_size = 20.0;
    int max_ticks = 300;
    PropertyBounds player_bounds{};
    PropertyBounds boss_bounds{};
    // Skill types only differ in which part of the player range bound they may use.
    Bounds melee_range{};
    Bounds ranged_range{};
    // The boss used when boss content is not generated.
    CharacterConfig default_boss{};
    double damage_variance = 0.1;
    double spawn_jitter = 1.0;
    std::uint64_t rng_seed = 0;

    static GameConfig defaults();

    // Throws ConfigError naming the offending field.
    void validate() const;

    // Bound that applies to one property of one character, including the
    // skill-type restriction on player range.
    Bounds bounds_for(Role role, SkillType skill, Property p) const;
    const PropertyBounds& bounds_for(Role role) const {
        return role == Role::Player ? player_bounds : boss_bounds;
    }

    // Throws ConfigError when a member violates its bounds or the team shape is wrong.
    void validate_team(const TeamConfig& team) const;
    bool team_in_bounds(const TeamConfig& team) const;

    // Normalized property vector of a character, against the role bounds.
    PropertyValues normalized(const CharacterConfig& c) const;
};

GameConfig load_game_config(const std::filesystem::path& path);
void save_game_config(const GameConfig& config, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Playtest records

inline constexpr std::size_t kNumPlayerStats = 8;
inline constexpr std::size_t kNumPlaytestVariables = kNumPlayerStats * kNumPlayers;  // 32

enum class PlayerStat : std::uint8_t {
    SurviveTime,
    MovedDistance,
    DamageDealt,
    DamageTaken,
    AttackCount,
    TimeInRange,
    HealthRemaining,
    Downtime,
};

inline constexpr std::array<std::string_view, kNumPlayerStats> kPlayerStatNames = {
    "survive_time",  "moved_distance", "damage_dealt",     "damage_taken",
    "attack_count",  "time_in_range",  "health_remaining", "downtime"};

// Variable index layout is stat-major: survive_time_p1..p4, moved_distance_p1..p4, ...
constexpr std::size_t variable_index(PlayerStat stat, std::size_t player) {
    return static_cast<std::size_t>(stat) * kNumPlayers + player;
}

// Names of the 32 playtest variables in catalog order.
const std::array<std::string, kNumPlaytestVariables>& playtest_variable_names();
std::optional<std::size_t> playtest_variable_index(std::string_view name);

using PlaytestValues = std::array<double, kNumPlaytestVariables>;

struct PlaytestRow {
    PlaytestValues values{};
    bool win = false;
    int episode_ticks = 0;
    std::uint64_t seed = 0;

    double operator()(PlayerStat stat, std::size_t player) const {
        return values[variable_index(stat, player)];
    }
    double& operator()(PlayerStat stat, std::size_t player) {
        return values[variable_index(stat, player)];
    }

    friend bool operator==(const PlaytestRow&, const PlaytestRow&) = default;
};

struct PlaytestSummary {
    double winrate = 0.0;
    int n_episodes = 0;
    int wins = 0;
    PlaytestValues mean_row{};
    double mean_episode_ticks = 0.0;
};

class Simulator {
public:
    // Validates the config; throws ConfigError.
    explicit Simulator(GameConfig config);

    const GameConfig& config() const { return config_; }

    // Resets the simulator's own stream, which feeds seeds to estimate_winrate.
    void reseed(std::uint64_t seed) { stream_.reseed(seed); }

    // One full episode. Pure function of (config, team, episode_seed).
    PlaytestRow run_episode(const TeamConfig& team, std::uint64_t episode_seed) const;

    // n_episodes runs with seeds derived from base_seed.
    PlaytestSummary estimate_winrate(const TeamConfig& team, int n_episodes, std::uint64_t base_seed) const;

    // Same, with the base seed drawn from the simulator's stream.
    PlaytestSummary estimate_winrate(const TeamConfig& team, int n_episodes);

    // Uniformly random in-bounds players (skill type drawn first). The boss is
    // the configured default unless randomize_boss is set.
    TeamConfig random_team(Rng& rng, bool randomize_boss = false) const;

private:
    GameConfig config_;
    Rng stream_;
};

struct LogSamplingConfig {
    std::uint64_t seed = 0;
    bool randomize_boss = false;
};

// One episode per uniformly sampled team.
std::vector<PlaytestRow> collect_log_dataset(const Simulator& sim, int n_rows, const LogSamplingConfig& sampling);

PlaytestSummary summarize(const std::vector<PlaytestRow>& rows);

// JSONL: one object per line, keys are the 32 variable names followed by
// "win", "episode_ticks" and "seed".
std::string playtest_row_to_json(const PlaytestRow& row);
PlaytestRow playtest_row_from_json(std::string_view line);
void write_playtest_jsonl(const std::vector<PlaytestRow>& rows, std::ostream& out);
void write_playtest_jsonl(const std::vector<PlaytestRow>& rows, const std::filesystem::path& path);
std::vector<PlaytestRow> read_playtest_jsonl(const std::filesystem::path& path);

}  // namespace chatpcg
