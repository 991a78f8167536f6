#pragma once

#include "chatpcg/reward_dsl.hpp"
#include "chatpcg/simulator.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace chatpcg {

inline constexpr std::size_t kAgentSlotSize = 11;
inline constexpr std::size_t kFrameSize = kAgentSlotSize * kNumPlayers;  // 44
inline constexpr std::size_t kFrameStack = 4;
inline constexpr std::size_t kObservationSize = kFrameSize * kFrameStack;  // 176
inline constexpr std::size_t kNumActionHeads = kNumProperties;
inline constexpr std::size_t kNumCategories = 5;
inline constexpr int kJointActionCount = 78125;  // 5^7

using GenFrame = std::array<double, kFrameSize>;
// Oldest frame first.
using GenObservation = std::array<double, kObservationSize>;

// Category per property: 0 -large, 1 -small, 2 no change, 3 +small, 4 +large.
struct GenAction {
    std::array<std::uint8_t, kNumActionHeads> deltas{2, 2, 2, 2, 2, 2, 2};

    static GenAction no_change() { return {}; }
    // Base-5 digits, property 0 least significant.
    static GenAction from_index(int index);
    int index() const;
    bool operator==(const GenAction&) const = default;
};

enum class RewardKind { Winrate, Llm, Hybrid };
std::string_view to_string(RewardKind kind);
RewardKind reward_kind_from_string(std::string_view s);

struct RewardSpec {
    RewardKind kind = RewardKind::Winrate;
    std::optional<dsl::RewardProgram> program;
    double w_wr = 0.97;
    double w_llm = 0.03;

    void validate() const;
};

struct GenEnvConfig {
    int horizon = 40;
    int n_episodes = 16;
    double goal_winrate = 0.7;
    double large_step = 0.10;  // fraction of the bound width
    double small_step = 0.02;

    void validate() const;
};

void to_json(nlohmann::json& j, const GenEnvConfig& c);
void from_json(const nlohmann::json& j, GenEnvConfig& c);

struct GenEpisodeState {
    TeamConfig team;
    int t = 0;
    int turn = 0;
    double prev_distance = 0.0;
    double goal_winrate = 0.7;
    int horizon = 40;
    PlaytestSummary last_summary;
};

struct StepInfo {
    double winrate = 0.0;
    double l_t = 0.0;
    double r_wr = 0.0;
    double r_llm = 0.0;
    std::vector<double> module_values;  // llm and hybrid only
    bool llm_error = false;
};

nlohmann::json to_json(const StepInfo& info);

struct StepResult {
    GenObservation obs{};
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

// Signed raw change of one category for a property with bound width `width`.
double category_step(const GenEnvConfig& config, int category, double width);

// Adjusts player `agent` only, clamping to its skill-type bounds.
TeamConfig apply_action(const GameConfig& game, const GenEnvConfig& config, const TeamConfig& team, int agent,
                        const GenAction& action);

// Layout per player: 7 normalized properties, melee/ranged one-hot, update
// flag, agent index / 3.
GenFrame encode_frame(const GameConfig& game, const TeamConfig& team, int turn);

struct WinrateReward {
    double r = 0.0;
    double l_cur = 0.0;
};

WinrateReward winrate_reward(double l_prev, const PlaytestSummary& summary, double goal);
// Total of `program` on the summary's mean row; evaluation errors give 0 and a
// logged warning. `catalog` supplies the constants.
double llm_reward(const dsl::RewardProgram& program, const PlaytestSummary& summary,
                  const dsl::VariableCatalog& catalog, std::vector<double>* module_values = nullptr,
                  bool* failed = nullptr);
double hybrid_reward(double r_wr, double r_llm, double w_wr, double w_llm);

class EnvUsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class EpisodicEnv {
public:
    virtual ~EpisodicEnv() = default;
    virtual GenObservation reset(std::uint64_t seed) = 0;
    virtual StepResult step(const GenAction& action) = 0;
    virtual int horizon() const = 0;
    virtual double goal() const = 0;
};

class GenEnv final : public EpisodicEnv {
public:
    GenEnv(GameConfig game, GenEnvConfig config, RewardSpec reward);

    GenObservation reset(std::uint64_t seed) override;
    StepResult step(const GenAction& action) override;
    int horizon() const override { return config_.horizon; }
    double goal() const override { return config_.goal_winrate; }

    bool done() const { return state_.t >= config_.horizon; }
    const GenEpisodeState& state() const { return state_; }
    GenObservation observation() const;
    const GameConfig& game() const { return sim_.config(); }
    const GenEnvConfig& config() const { return config_; }
    const RewardSpec& reward_spec() const { return reward_; }

private:
    PlaytestSummary playtest();

    Simulator sim_;
    GenEnvConfig config_;
    RewardSpec reward_;
    dsl::VariableCatalog catalog_;
    GenEpisodeState state_;
    std::array<GenFrame, kFrameStack> frames_{};
    std::uint64_t playtest_seed_ = 0;
    bool started_ = false;
};

}  // namespace chatpcg
