#include "chatpcg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chatpcg {

std::string_view property_name(Property p) { return kPropertyNames[index_of(p)]; }

std::optional<Property> property_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNumProperties; ++i) {
        if (kPropertyNames[i] == name) return kAllProperties[i];
    }
    return std::nullopt;
}

std::string_view to_string(Role role) { return role == Role::Player ? "player" : "boss"; }
std::string_view to_string(SkillType skill) { return skill == SkillType::Melee ? "melee" : "ranged"; }

Role role_from_string(std::string_view text) {
    if (text == "player") return Role::Player;
    if (text == "boss") return Role::Boss;
    throw ConfigError("role", "unknown role '" + std::string(text) + "'");
}

SkillType skill_from_string(std::string_view text) {
    if (text == "melee") return SkillType::Melee;
    if (text == "ranged") return SkillType::Ranged;
    throw ConfigError("skill_type", "unknown skill type '" + std::string(text) + "'");
}

GameConfig GameConfig::defaults() {
    GameConfig c;
    c.arena_size = 20.0;
    c.max_ticks = 300;
    //                max_health      armor       speed       cooldown     cast_time   range        damage
    c.player_bounds = {{{50, 500}, {0.0, 0.6}, {0.1, 1.0}, {1.0, 10.0}, {0.5, 4.0}, {1.0, 10.0}, {5, 50}}};
    c.boss_bounds = {{{1000, 10000}, {0.0, 1.0}, {0.1, 1.0}, {1.0, 10.0}, {0.5, 4.0}, {1.0, 10.0}, {10, 100}}};
    c.melee_range = {1.0, 3.0};
    c.ranged_range = {3.0, 10.0};
    c.default_boss.agent_id = kBossAgentId;
    c.default_boss.role = Role::Boss;
    c.default_boss.skill_type = SkillType::Melee;
    c.default_boss.properties = {2000.0, 0.2, 0.4, 4.0, 1.5, 3.0, 30.0};
    c.damage_variance = 0.1;
    c.spawn_jitter = 3.0;
    c.rng_seed = 0;
    return c;
}

namespace {

void check_table(const PropertyBounds& table, const std::string& prefix) {
    for (std::size_t i = 0; i < kNumProperties; ++i) {
        const Bounds& b = table[i];
        const std::string field = prefix + "." + std::string(kPropertyNames[i]);
        if (!std::isfinite(b.min) || !std::isfinite(b.max) || !(b.max > b.min)) {
            throw ConfigError(field, field + " bounds must satisfy max > min");
        }
        if (kAllProperties[i] == Property::Armor) {
            if (b.min < 0.0 || b.max > 1.0) throw ConfigError(field, field + " must lie within [0, 1]");
        } else if (!(b.min > 0.0)) {
            throw ConfigError(field, field + " must be strictly positive");
        }
    }
}

void check_character(const GameConfig& config, const CharacterConfig& c, const std::string& label) {
    for (Property p : kAllProperties) {
        const Bounds b = config.bounds_for(c.role, c.skill_type, p);
        const double v = c[p];
        if (!std::isfinite(v) || !b.contains(v)) {
            const std::string field = label + "." + std::string(property_name(p));
            throw ConfigError(field, field + " = " + std::to_string(v) + " outside [" + std::to_string(b.min) +
                                         ", " + std::to_string(b.max) + "]");
        }
    }
}

}  // namespace

void GameConfig::validate() const {
    if (max_ticks < 1) throw ConfigError("max_ticks", "max_ticks must be ≥ 1");
    if (!(arena_size > 0.0) || !std::isfinite(arena_size)) {
        throw ConfigError("arena_size", "arena_size must be positive");
    }
    check_table(player_bounds, "player_bounds");
    check_table(boss_bounds, "boss_bounds");
    const Bounds& range = player_bounds[index_of(Property::Range)];
    for (auto [sub, name] : {std::pair{melee_range, "melee_range"}, std::pair{ranged_range, "ranged_range"}}) {
        if (!(sub.max > sub.min) || sub.min < range.min || sub.max > range.max) {
            throw ConfigError(name, std::string(name) + " must be a non-degenerate sub-interval of player range");
        }
    }
    if (damage_variance < 0.0 || damage_variance >= 1.0) {
        throw ConfigError("damage_variance", "damage_variance must lie within [0, 1)");
    }
    if (spawn_jitter < 0.0) throw ConfigError("spawn_jitter", "spawn_jitter must be non-negative");
    if (default_boss.role != Role::Boss) throw ConfigError("default_boss.role", "default_boss must have role boss");
    check_character(*this, default_boss, "default_boss");
}

Bounds GameConfig::bounds_for(Role role, SkillType skill, Property p) const {
    if (role == Role::Player && p == Property::Range) {
        return skill == SkillType::Melee ? melee_range : ranged_range;
    }
    return bounds_for(role)[index_of(p)];
}

void GameConfig::validate_team(const TeamConfig& team) const {
    for (std::size_t i = 0; i < kNumPlayers; ++i) {
        const CharacterConfig& p = team.players[i];
        const std::string label = "players[" + std::to_string(i) + "]";
        if (p.role != Role::Player) throw ConfigError(label + ".role", label + " must have role player");
        if (p.agent_id != static_cast<int>(i)) {
            throw ConfigError(label + ".agent_id", label + " must have agent_id " + std::to_string(i));
        }
        check_character(*this, p, label);
    }
    if (team.boss.role != Role::Boss) throw ConfigError("boss.role", "boss must have role boss");
    if (team.boss.agent_id != kBossAgentId) throw ConfigError("boss.agent_id", "boss must have agent_id 4");
    check_character(*this, team.boss, "boss");
}

bool GameConfig::team_in_bounds(const TeamConfig& team) const {
    try {
        validate_team(team);
        return true;
    } catch (const ConfigError&) {
        return false;
    }
}

PropertyValues GameConfig::normalized(const CharacterConfig& c) const {
    PropertyValues out{};
    const PropertyBounds& table = bounds_for(c.role);
    for (std::size_t i = 0; i < kNumProperties; ++i) out[i] = table[i].normalize(c.properties[i]);
    return out;
}

// ---------------------------------------------------------------------------

const std::array<std::string, kNumPlaytestVariables>& playtest_variable_names() {
    static const auto names = [] {
        std::array<std::string, kNumPlaytestVariables> out;
        for (std::size_t s = 0; s < kNumPlayerStats; ++s) {
            for (std::size_t p = 0; p < kNumPlayers; ++p) {
                out[s * kNumPlayers + p] = std::string(kPlayerStatNames[s]) + "_p" + std::to_string(p + 1);
            }
        }
        return out;
    }();
    return names;
}

std::optional<std::size_t> playtest_variable_index(std::string_view name) {
    const auto& names = playtest_variable_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Combatant {
    const CharacterConfig* config = nullptr;
    Vec2 pos;
    double health = 0.0;
    bool alive = true;
    bool casting = false;
    double cast_left = 0.0;
    double cooldown_left = 0.0;
    int target = -1;
};

constexpr double kRangeSlack = 1e-9;

}  // namespace

Simulator::Simulator(GameConfig config) : config_(std::move(config)), stream_(config_.rng_seed) { config_.validate(); }

PlaytestRow Simulator::run_episode(const TeamConfig& team, std::uint64_t episode_seed) const {
    Rng rng(episode_seed);
    const double arena = config_.arena_size;
    const double jitter = config_.spawn_jitter;

    std::array<Combatant, kNumPlayers + 1> agents{};
    for (std::size_t i = 0; i < kNumPlayers; ++i) {
        Combatant& a = agents[i];
        a.config = &team.players[i];
        a.pos = {arena * static_cast<double>(i + 1) / (kNumPlayers + 1) + rng.uniform(-jitter, jitter),
                 2.0 + rng.uniform(-jitter, jitter)};
        a.health = (*a.config)[Property::MaxHealth];
        a.target = kBossAgentId;
    }
    Combatant& boss = agents[kBossAgentId];
    boss.config = &team.boss;
    boss.pos = {arena / 2.0, arena - 2.0};
    boss.health = team.boss[Property::MaxHealth];

    for (Combatant& a : agents) {
        a.pos.x = std::clamp(a.pos.x, 0.0, arena);
        a.pos.y = std::clamp(a.pos.y, 0.0, arena);
    }

    PlaytestRow row;
    row.seed = episode_seed;
    const double variance = config_.damage_variance;

    auto land_hit = [&](int attacker, int target_index) {
        Combatant& target = agents[target_index];
        if (!target.alive) return;
        const CharacterConfig& src = *agents[attacker].config;
        const double roll = 1.0 + rng.uniform(-variance, variance);
        const double dealt = src[Property::Damage] * roll * (1.0 - (*target.config)[Property::Armor]);
        target.health = std::max(0.0, target.health - dealt);
        if (attacker != kBossAgentId) {
            row(PlayerStat::DamageDealt, attacker) += dealt;
            row(PlayerStat::AttackCount, attacker) += 1.0;
        } else {
            row(PlayerStat::DamageTaken, target_index) += dealt;
        }
        if (target.health <= 0.0) target.alive = false;
    };

    int tick = 0;
    bool won = false;
    int living_players = static_cast<int>(kNumPlayers);
    std::array<int, kNumPlayers> death_tick{};
    death_tick.fill(-1);

    for (; tick < config_.max_ticks; ++tick) {
        for (int idx = 0; idx <= kBossAgentId; ++idx) {
            Combatant& self = agents[idx];
            if (!boss.alive) break;
            if (!self.alive) continue;

            if (idx == kBossAgentId) {
                double best = std::numeric_limits<double>::infinity();
                int nearest = -1;
                for (int p = 0; p < static_cast<int>(kNumPlayers); ++p) {
                    if (!agents[p].alive) continue;
                    const double d = distance(self.pos, agents[p].pos);
                    if (d < best) {
                        best = d;
                        nearest = p;
                    }
                }
                // A boss cast in flight stays locked on its original target.
                if (!self.casting) self.target = nearest;
                if (nearest < 0) break;
            }

            const CharacterConfig& cfg = *self.config;
            const double range = cfg[Property::Range];
            bool busy = false;

            if (self.casting) {
                busy = true;
                self.cast_left -= 1.0;
                if (self.cast_left <= 0.0) {
                    land_hit(idx, self.target);
                    self.casting = false;
                    // Carry the fractional overshoot so non-integer timings matter.
                    self.cooldown_left = cfg[Property::Cooldown] + std::max(self.cast_left, -1.0);
                }
            } else {
                if (self.cooldown_left > 0.0) busy = true;
                self.cooldown_left -= 1.0;
                Combatant& target = agents[self.target];
                const double d = distance(self.pos, target.pos);
                if (d > range + kRangeSlack) {
                    const double step = std::min(cfg[Property::Speed], d - range);
                    self.pos.x += (target.pos.x - self.pos.x) / d * step;
                    self.pos.y += (target.pos.y - self.pos.y) / d * step;
                    if (idx != kBossAgentId) row(PlayerStat::MovedDistance, idx) += step;
                } else if (self.cooldown_left <= 0.0) {
                    self.casting = true;
                    self.cast_left = cfg[Property::CastTime] + std::max(self.cooldown_left, -1.0);
                    self.cooldown_left = 0.0;
                }
            }

            if (idx != kBossAgentId) {
                if (busy) row(PlayerStat::Downtime, idx) += 1.0;
                if (distance(self.pos, boss.pos) <= range + kRangeSlack) row(PlayerStat::TimeInRange, idx) += 1.0;
            }
        }

        for (std::size_t p = 0; p < kNumPlayers; ++p) {
            if (!agents[p].alive && death_tick[p] < 0) {
                death_tick[p] = tick + 1;
                --living_players;
            }
        }
        if (!boss.alive) {
            won = true;
            ++tick;
            break;
        }
        if (living_players == 0) {
            ++tick;
            break;
        }
    }

    row.win = won;
    row.episode_ticks = tick;
    for (std::size_t p = 0; p < kNumPlayers; ++p) {
        row(PlayerStat::SurviveTime, p) = death_tick[p] < 0 ? tick : death_tick[p];
        row(PlayerStat::HealthRemaining, p) = agents[p].alive ? agents[p].health : 0.0;
    }
    return row;
}

PlaytestSummary summarize(const std::vector<PlaytestRow>& rows) {
    PlaytestSummary s;
    s.n_episodes = static_cast<int>(rows.size());
    if (rows.empty()) return s;
    double ticks = 0.0;
    for (const PlaytestRow& r : rows) {
        if (r.win) ++s.wins;
        ticks += r.episode_ticks;
        for (std::size_t v = 0; v < kNumPlaytestVariables; ++v) s.mean_row[v] += r.values[v];
    }
    const double n = static_cast<double>(rows.size());
    for (double& v : s.mean_row) v /= n;
    s.mean_episode_ticks = ticks / n;
    s.winrate = static_cast<double>(s.wins) / n;
    return s;
}

PlaytestSummary Simulator::estimate_winrate(const TeamConfig& team, int n_episodes, std::uint64_t base_seed) const {
    if (n_episodes < 1) throw std::invalid_argument("estimate_winrate: n_episodes must be ≥ 1");
    std::vector<PlaytestRow> rows;
    rows.reserve(static_cast<std::size_t>(n_episodes));
    for (int e = 0; e < n_episodes; ++e) {
        rows.push_back(run_episode(team, derive_seed(base_seed, static_cast<std::uint64_t>(e))));
    }
    return summarize(rows);
}

PlaytestSummary Simulator::estimate_winrate(const TeamConfig& team, int n_episodes) {
    return estimate_winrate(team, n_episodes, stream_.next_u64());
}

TeamConfig Simulator::random_team(Rng& rng, bool randomize_boss) const {
    TeamConfig team;
    for (std::size_t i = 0; i < kNumPlayers; ++i) {
        CharacterConfig& c = team.players[i];
        c.agent_id = static_cast<int>(i);
        c.role = Role::Player;
        c.skill_type = rng.coin() ? SkillType::Ranged : SkillType::Melee;
        for (Property p : kAllProperties) {
            const Bounds b = config_.bounds_for(Role::Player, c.skill_type, p);
            c[p] = b.clamp(rng.uniform(b.min, b.max));
        }
    }
    team.boss = config_.default_boss;
    if (randomize_boss) {
        team.boss.skill_type = rng.coin() ? SkillType::Ranged : SkillType::Melee;
        for (Property p : kAllProperties) {
            const Bounds b = config_.bounds_for(Role::Boss, team.boss.skill_type, p);
            team.boss[p] = b.clamp(rng.uniform(b.min, b.max));
        }
    }
    return team;
}

std::vector<PlaytestRow> collect_log_dataset(const Simulator& sim, int n_rows, const LogSamplingConfig& sampling) {
    if (n_rows < 1) throw std::invalid_argument("collect_log_dataset: n_rows must be ≥ 1");
    Rng team_rng(derive_seed(sampling.seed, "log_teams"));
    const std::uint64_t episode_root = derive_seed(sampling.seed, "log_episodes");
    std::vector<PlaytestRow> rows;
    rows.reserve(static_cast<std::size_t>(n_rows));
    for (int i = 0; i < n_rows; ++i) {
        const TeamConfig team = sim.random_team(team_rng, sampling.randomize_boss);
        rows.push_back(sim.run_episode(team, derive_seed(episode_root, static_cast<std::uint64_t>(i))));
    }
    return rows;
}

}  // namespace chatpcg
