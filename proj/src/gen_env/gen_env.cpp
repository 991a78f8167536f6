#include "chatpcg/gen_env.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

namespace chatpcg {

GenAction GenAction::from_index(int index) {
    if (index < 0 || index >= kJointActionCount) throw std::out_of_range("joint action index out of range");
    GenAction a;
    for (std::size_t h = 0; h < kNumActionHeads; ++h) {
        a.deltas[h] = static_cast<std::uint8_t>(index % 5);
        index /= 5;
    }
    return a;
}

int GenAction::index() const {
    int index = 0;
    for (std::size_t h = kNumActionHeads; h-- > 0;) index = index * 5 + deltas[h];
    return index;
}

std::string_view to_string(RewardKind kind) {
    switch (kind) {
        case RewardKind::Winrate: return "winrate";
        case RewardKind::Llm: return "llm";
        case RewardKind::Hybrid: return "hybrid";
    }
    return "?";
}

RewardKind reward_kind_from_string(std::string_view s) {
    if (s == "winrate") return RewardKind::Winrate;
    if (s == "llm") return RewardKind::Llm;
    if (s == "hybrid") return RewardKind::Hybrid;
    throw std::invalid_argument("unknown reward kind '" + std::string(s) + "' (expected winrate, llm or hybrid)");
}

void RewardSpec::validate() const {
    if (kind != RewardKind::Winrate && !program) {
        throw ConfigError("program", std::string(to_string(kind)) + " reward requires a reward program");
    }
    if (!std::isfinite(w_wr) || !std::isfinite(w_llm)) throw ConfigError("weights", "reward weights must be finite");
}

void GenEnvConfig::validate() const {
    if (horizon < 1) throw ConfigError("horizon", "horizon must be ≥ 1");
    if (n_episodes < 1) throw ConfigError("n_episodes", "n_episodes must be ≥ 1");
    if (!(goal_winrate >= 0.0 && goal_winrate <= 1.0)) throw ConfigError("goal_winrate", "goal_winrate must lie in [0, 1]");
    if (!(large_step > 0.0 && large_step <= 1.0)) throw ConfigError("large_step", "large_step must lie in (0, 1]");
    if (!(small_step > 0.0 && small_step <= large_step)) {
        throw ConfigError("small_step", "small_step must lie in (0, large_step]");
    }
}

void to_json(nlohmann::json& j, const GenEnvConfig& c) {
    j = {{"horizon", c.horizon},
         {"n_episodes", c.n_episodes},
         {"goal_winrate", c.goal_winrate},
         {"large_step", c.large_step},
         {"small_step", c.small_step}};
}

void from_json(const nlohmann::json& j, GenEnvConfig& c) {
    c = GenEnvConfig{};
    c.horizon = j.value("horizon", c.horizon);
    c.n_episodes = j.value("n_episodes", c.n_episodes);
    c.goal_winrate = j.value("goal_winrate", c.goal_winrate);
    c.large_step = j.value("large_step", c.large_step);
    c.small_step = j.value("small_step", c.small_step);
}

nlohmann::json to_json(const StepInfo& info) {
    nlohmann::json j = {{"winrate", info.winrate}, {"l_t", info.l_t}, {"r_wr", info.r_wr}, {"r_llm", info.r_llm}};
    if (!info.module_values.empty()) j["module_values"] = info.module_values;
    if (info.llm_error) j["llm_error"] = true;
    return j;
}

double category_step(const GenEnvConfig& config, int category, double width) {
    switch (category) {
        case 0: return -config.large_step * width;
        case 1: return -config.small_step * width;
        case 2: return 0.0;
        case 3: return config.small_step * width;
        case 4: return config.large_step * width;
        default: throw std::out_of_range("action category must be in 0..4");
    }
}

TeamConfig apply_action(const GameConfig& game, const GenEnvConfig& config, const TeamConfig& team, int agent,
                        const GenAction& action) {
    if (agent < 0 || agent >= static_cast<int>(kNumPlayers)) throw std::out_of_range("agent index out of range");
    TeamConfig out = team;
    CharacterConfig& c = out.players[static_cast<std::size_t>(agent)];
    for (std::size_t h = 0; h < kNumActionHeads; ++h) {
        if (action.deltas[h] == 2) continue;
        const Bounds b = game.bounds_for(Role::Player, c.skill_type, kAllProperties[h]);
        c.properties[h] = b.clamp(c.properties[h] + category_step(config, action.deltas[h], b.width()));
    }
    return out;
}

GenFrame encode_frame(const GameConfig& game, const TeamConfig& team, int turn) {
    GenFrame f{};
    for (std::size_t i = 0; i < kNumPlayers; ++i) {
        const CharacterConfig& c = team.players[i];
        double* slot = f.data() + i * kAgentSlotSize;
        const PropertyValues norm = game.normalized(c);
        for (std::size_t p = 0; p < kNumProperties; ++p) slot[p] = std::clamp(norm[p], 0.0, 1.0);
        slot[7] = c.skill_type == SkillType::Melee ? 1.0 : 0.0;
        slot[8] = c.skill_type == SkillType::Ranged ? 1.0 : 0.0;
        slot[9] = static_cast<int>(i) == turn ? 1.0 : 0.0;
        slot[10] = static_cast<double>(i) / static_cast<double>(kNumPlayers - 1);
    }
    return f;
}

WinrateReward winrate_reward(double l_prev, const PlaytestSummary& summary, double goal) {
    const double l_cur = std::fabs(goal - summary.winrate);
    return {l_prev - l_cur, l_cur};
}

double llm_reward(const dsl::RewardProgram& program, const PlaytestSummary& summary,
                  const dsl::VariableCatalog& catalog, std::vector<double>* module_values, bool* failed) {
    if (failed) *failed = false;
    try {
        const dsl::ProgramValue v = dsl::evaluate_program(program, dsl::bind_row(summary.mean_row, catalog));
        if (module_values) *module_values = v.module_values;
        return v.total;
    } catch (const dsl::EvalError& e) {
        spdlog::warn("reward program failed on playtest summary, using reward 0: {}", e.what());
        if (module_values) module_values->assign(program.modules.size(), 0.0);
        if (failed) *failed = true;
        return 0.0;
    }
}

double hybrid_reward(double r_wr, double r_llm, double w_wr, double w_llm) { return r_wr * w_wr + r_llm * w_llm; }

GenEnv::GenEnv(GameConfig game, GenEnvConfig config, RewardSpec reward)
    : sim_(std::move(game)), config_(config), reward_(std::move(reward)) {
    config_.validate();
    reward_.validate();
    catalog_ = dsl::playtest_catalog(sim_.config());
}

PlaytestSummary GenEnv::playtest() {
    return sim_.estimate_winrate(state_.team, config_.n_episodes,
                                 derive_seed(playtest_seed_, static_cast<std::uint64_t>(state_.t)));
}

GenObservation GenEnv::observation() const {
    GenObservation obs{};
    for (std::size_t k = 0; k < kFrameStack; ++k) std::copy(frames_[k].begin(), frames_[k].end(), obs.begin() + k * kFrameSize);
    return obs;
}

GenObservation GenEnv::reset(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "team"));
    playtest_seed_ = derive_seed(seed, "playtest");
    state_ = GenEpisodeState{};
    state_.team = sim_.random_team(rng);
    state_.goal_winrate = config_.goal_winrate;
    state_.horizon = config_.horizon;
    state_.last_summary = playtest();
    state_.prev_distance = std::fabs(config_.goal_winrate - state_.last_summary.winrate);
    frames_.fill(encode_frame(sim_.config(), state_.team, state_.turn));
    started_ = true;
    return observation();
}

StepResult GenEnv::step(const GenAction& action) {
    if (!started_) throw EnvUsageError("step called before reset");
    if (done()) throw EnvUsageError("step called on a finished episode; call reset");
    state_.team = apply_action(sim_.config(), config_, state_.team, state_.turn, action);
    ++state_.t;
    state_.turn = state_.t % static_cast<int>(kNumPlayers);
    state_.last_summary = playtest();

    StepResult out;
    const WinrateReward wr = winrate_reward(state_.prev_distance, state_.last_summary, config_.goal_winrate);
    out.info.winrate = state_.last_summary.winrate;
    out.info.l_t = wr.l_cur;
    out.info.r_wr = wr.r;
    state_.prev_distance = wr.l_cur;
    if (reward_.kind != RewardKind::Winrate) {
        out.info.r_llm = llm_reward(*reward_.program, state_.last_summary, catalog_, &out.info.module_values,
                                    &out.info.llm_error);
    }
    switch (reward_.kind) {
        case RewardKind::Winrate: out.reward = out.info.r_wr; break;
        case RewardKind::Llm: out.reward = out.info.r_llm; break;
        case RewardKind::Hybrid: out.reward = hybrid_reward(out.info.r_wr, out.info.r_llm, reward_.w_wr, reward_.w_llm); break;
    }

    std::rotate(frames_.begin(), frames_.begin() + 1, frames_.end());
    frames_.back() = encode_frame(sim_.config(), state_.team, state_.turn);
    out.obs = observation();
    out.done = done();
    return out;
}

}  // namespace chatpcg
