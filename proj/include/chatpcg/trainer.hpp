#pragma once

#include "chatpcg/gen_env.hpp"
#include "chatpcg/metrics.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace chatpcg {

struct MlpShape {
    int input = static_cast<int>(kObservationSize);
    std::vector<int> hidden{64, 64};
    int heads = static_cast<int>(kNumActionHeads);
    int categories = static_cast<int>(kNumCategories);

    int outputs() const { return heads * categories; }
    Eigen::Index n_params() const;
    bool operator==(const MlpShape&) const = default;
};

// tanh hidden layers, linear output. Parameters are one flat vector holding,
// per layer, the column-major weight matrix followed by the bias.
class Mlp {
public:
    struct Cache {
        std::vector<Eigen::VectorXd> activations;  // input, then each hidden layer
    };

    Mlp() = default;
    explicit Mlp(MlpShape shape);

    // Hidden weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)) times init_scale, the
    // output layer a further 100x smaller, biases zero.
    static Mlp init(std::uint64_t seed, MlpShape shape, double init_scale = 1.0);

    const MlpShape& shape() const { return shape_; }
    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }

    Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& x, Cache& cache) const;
    // grad += d(sum_i dlogits_i * logits_i) / d params
    void backward(const Cache& cache, const Eigen::VectorXd& dlogits, Eigen::VectorXd& grad) const;

private:
    MlpShape shape_;
    Eigen::VectorXd params_;
};

// categories x heads, each column a softmax distribution.
Eigen::MatrixXd head_probabilities(const Eigen::VectorXd& logits, const MlpShape& shape);
double action_log_prob(const Eigen::MatrixXd& probs, const GenAction& action);
double policy_entropy(const Eigen::MatrixXd& probs);

// d/dlogits of log pi(action) + entropy_coef * H.
Eigen::VectorXd log_prob_entropy_dlogits(const Eigen::MatrixXd& probs, const GenAction& action,
                                         double entropy_coef);

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long t = 0;
};

struct PolicySnapshot {
    Mlp net;
    AdamState adam;
    std::uint64_t rng_seed = 0;
    long step_count = 0;
};

PolicySnapshot init_policy(std::uint64_t seed, std::vector<int> hidden = {64, 64}, double init_scale = 1.0);

struct PolicyDecision {
    GenAction action;
    double log_prob = 0.0;
};

// Samples each head independently, or takes each head's argmax when greedy.
PolicyDecision policy_step(const PolicySnapshot& policy, std::span<const double> obs, Rng& rng, bool greedy = false);

// Gradient of log pi(action | obs) + entropy_coef * H(obs).
Eigen::VectorXd log_prob_gradient(const Mlp& net, std::span<const double> obs, const GenAction& action,
                                  double entropy_coef = 0.0);

struct Transition {
    GenObservation obs;
    GenAction action;
    double reward = 0.0;
    double log_prob = 0.0;
    int t = 0;  // time index within the episode
};

// Mean over transitions of advantage * grad log pi + entropy_coef * grad H.
Eigen::VectorXd policy_gradient(const Mlp& net, std::span<const Transition> batch,
                                std::span<const double> advantages, double entropy_coef,
                                double* mean_abs_logit = nullptr, double* mean_entropy = nullptr);

struct TrainHyperparams {
    std::vector<int> hidden{64, 64};
    double learning_rate = 3e-3;
    double entropy_coef = 0.01;
    double gamma = 0.99;
    double baseline_decay = 0.1;  // EMA step for the per-timestep baseline
    bool normalize_advantages = true;
    int episodes_per_update = 2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double init_scale = 1.0;
    double max_mean_abs_logit = 1e4;
    int curve_interval = 200;  // environment steps

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainHyperparams& h);
void from_json(const nlohmann::json& j, TrainHyperparams& h);

struct CurvePoint {
    long step = 0;
    double mean_return = 0.0;
    double mean_winrate_error = 0.0;
    double entropy = 0.0;
};

using TrainingCurve = std::vector<CurvePoint>;

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainOutputs {
    std::filesystem::path checkpoint_path;  // empty: not written
    std::filesystem::path curve_path;
};

struct TrainResult {
    PolicySnapshot policy;
    TrainingCurve curve;
};

// REINFORCE with a per-timestep moving-average baseline and an entropy bonus.
// Runs exactly total_steps environment steps; a trailing partial episode is
// still used for the final update.
TrainResult train(EpisodicEnv& env, long total_steps, const TrainHyperparams& hp, std::uint64_t seed,
                  const TrainOutputs& outputs = {});

void write_training_curve(const TrainingCurve& curve, const std::filesystem::path& path);
TrainingCurve read_training_curve(const std::filesystem::path& path);

nlohmann::json checkpoint_to_json(const PolicySnapshot& policy);
PolicySnapshot checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const PolicySnapshot& policy, const std::filesystem::path& path);
PolicySnapshot load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Content generators

class ContentGenerator {
public:
    virtual ~ContentGenerator() = default;
    virtual std::string name() const = 0;
    virtual TeamConfig generate(std::uint64_t seed) = 0;
};

class RandomAgent final : public ContentGenerator {
public:
    explicit RandomAgent(GameConfig game) : sim_(std::move(game)) {}
    std::string name() const override { return "random"; }
    TeamConfig generate(std::uint64_t seed) override;

private:
    Simulator sim_;
};

struct HeuristicConfig {
    double goal = 0.7;
    int budget = 20;  // accepted moves
    int n_episodes = 8;
    double step = 0.10;  // fraction of the bound width
    bool plateau_moves = true;  // also accept moves that leave the error unchanged; ties broken at random
};

struct HillClimbResult {
    TeamConfig initial;
    TeamConfig team;
    double initial_error = 0.0;
    double final_error = 0.0;
    int accepted = 0;
};

// Greedy hill climb over single-property +/-step moves from a random team;
// never accepts a move that increases the error.
// Candidates share one set of episode seeds so they are compared fairly.
class HeuristicAgent final : public ContentGenerator {
public:
    HeuristicAgent(GameConfig game, HeuristicConfig config);
    std::string name() const override { return "heuristic"; }
    TeamConfig generate(std::uint64_t seed) override { return climb(seed).team; }
    HillClimbResult climb(std::uint64_t seed) const;

private:
    Simulator sim_;
    HeuristicConfig config_;
};

// Runs one greedy episode of the policy and emits the final team.
class PolicyAgent final : public ContentGenerator {
public:
    PolicyAgent(PolicySnapshot policy, GameConfig game, GenEnvConfig env_config, bool greedy = true);
    std::string name() const override { return "policy"; }
    TeamConfig generate(std::uint64_t seed) override;

private:
    PolicySnapshot policy_;
    GenEnv env_;
    bool greedy_;
};

// Generates n teams and measures each with measure_episodes fresh episodes.
std::vector<ContentSample> sample_contents(ContentGenerator& generator, const Simulator& sim, int n,
                                           int measure_episodes, std::uint64_t seed);

}  // namespace chatpcg
