#include "chatpcg/reward_dsl.hpp"

namespace chatpcg::dsl {

namespace {

bool valid_identifier(std::string_view name) {
    if (name.empty()) return false;
    auto start = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
    if (!start(name.front())) return false;
    for (char c : name) {
        if (!start(c) && !(c >= '0' && c <= '9')) return false;
    }
    return name != "module" && name != "weight" && name != "if" && name != "and" && name != "or" && name != "not";
}

}  // namespace

void VariableCatalog::add_variable(std::string name, std::string description, double lo, std::optional<double> hi) {
    if (!valid_identifier(name)) throw std::invalid_argument("invalid catalog identifier '" + name + "'");
    if (index_.contains(name)) throw std::invalid_argument("duplicate catalog entry '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(description), lo, hi, std::nullopt});
}

void VariableCatalog::add_constant(std::string name, std::string description, double value) {
    add_variable(std::move(name), std::move(description), value, value);
    entries_.back().constant = value;
}

const CatalogEntry* VariableCatalog::find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second];
}

VariableCatalog playtest_catalog(const GameConfig& game) {
    const double ticks = game.max_ticks;
    const double hp_cap = game.player_bounds[index_of(Property::MaxHealth)].max;
    struct StatInfo {
        PlayerStat stat;
        const char* what;
        std::optional<double> hi;
    };
    const StatInfo stats[] = {
        {PlayerStat::SurviveTime, "ticks the player stayed alive", ticks},
        {PlayerStat::MovedDistance, "distance units the player moved", std::nullopt},
        {PlayerStat::DamageDealt, "damage the player dealt to the boss (hp)", std::nullopt},
        {PlayerStat::DamageTaken, "damage the player received from the boss (hp)", std::nullopt},
        {PlayerStat::AttackCount, "hits the player landed on the boss", std::nullopt},
        {PlayerStat::TimeInRange, "ticks the player spent within its attack range of the boss", ticks},
        {PlayerStat::HealthRemaining, "player hit points at episode end, 0 if dead", hp_cap},
        {PlayerStat::Downtime, "ticks the player spent casting or on cooldown", ticks},
    };
    VariableCatalog catalog;
    for (const StatInfo& s : stats) {
        for (std::size_t p = 0; p < kNumPlayers; ++p) {
            const auto& name = playtest_variable_names()[variable_index(s.stat, p)];
            catalog.add_variable(name, std::string(s.what) + ", player " + std::to_string(p + 1), 0.0, s.hi);
        }
    }
    catalog.add_constant("max_episode_time", "episode time limit in ticks", ticks);
    catalog.add_constant("boss_max_health", "hit points of the boss at episode start",
                         game.default_boss[Property::MaxHealth]);
    catalog.add_constant("player_max_health_limit", "largest allowed player max_health", hp_cap);
    catalog.add_constant("arena_size", "side length of the square arena (distance units)", game.arena_size);
    return catalog;
}

}  // namespace chatpcg::dsl
