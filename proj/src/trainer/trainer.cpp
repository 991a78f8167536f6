#include "chatpcg/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace chatpcg {

namespace {

std::vector<int> layer_dims(const MlpShape& s) {
    std::vector<int> dims{s.input};
    dims.insert(dims.end(), s.hidden.begin(), s.hidden.end());
    dims.push_back(s.outputs());
    return dims;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> obs, int expected) {
    if (static_cast<int>(obs.size()) != expected) {
        throw std::invalid_argument("observation has " + std::to_string(obs.size()) + " values, expected " +
                                    std::to_string(expected));
    }
    return {obs.data(), static_cast<Eigen::Index>(obs.size())};
}

}  // namespace

Eigen::Index MlpShape::n_params() const {
    const auto dims = layer_dims(*this);
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += static_cast<Eigen::Index>(dims[l + 1]) * (dims[l] + 1);
    return n;
}

Mlp::Mlp(MlpShape shape) : shape_(std::move(shape)) {
    if (shape_.input < 1 || shape_.heads < 1 || shape_.categories < 2) throw std::invalid_argument("invalid MLP shape");
    for (int h : shape_.hidden) {
        if (h < 1) throw std::invalid_argument("hidden layer sizes must be ≥ 1");
    }
    params_ = Eigen::VectorXd::Zero(shape_.n_params());
}

Mlp Mlp::init(std::uint64_t seed, MlpShape shape, double init_scale) {
    Mlp net(std::move(shape));
    Rng rng(seed);
    const auto dims = layer_dims(net.shape_);
    Eigen::Index off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const bool output = l + 2 == dims.size();
        const double limit = init_scale / std::sqrt(static_cast<double>(dims[l])) * (output ? 0.01 : 1.0);
        const Eigen::Index nw = static_cast<Eigen::Index>(dims[l + 1]) * dims[l];
        for (Eigen::Index i = 0; i < nw; ++i) net.params_[off + i] = rng.uniform(-limit, limit);
        off += nw + dims[l + 1];
    }
    return net;
}

Eigen::VectorXd Mlp::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Cache cache;
    return forward(x, cache);
}

Eigen::VectorXd Mlp::forward(const Eigen::Ref<const Eigen::VectorXd>& x, Cache& cache) const {
    const auto dims = layer_dims(shape_);
    if (x.size() != dims[0]) throw std::invalid_argument("MLP input has the wrong length");
    cache.activations.assign(1, x);
    Eigen::Index off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + off, dims[l + 1], dims[l]);
        off += w.size();
        const Eigen::Map<const Eigen::VectorXd> b(params_.data() + off, dims[l + 1]);
        off += b.size();
        Eigen::VectorXd z = w * cache.activations.back() + b;
        if (l + 2 == dims.size()) return z;
        cache.activations.push_back(z.array().tanh().matrix());
    }
    return {};
}

void Mlp::backward(const Cache& cache, const Eigen::VectorXd& dlogits, Eigen::VectorXd& grad) const {
    const auto dims = layer_dims(shape_);
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        offsets.push_back(off);
        off += static_cast<Eigen::Index>(dims[l + 1]) * (dims[l] + 1);
    }
    Eigen::VectorXd delta = dlogits;
    for (std::size_t l = dims.size() - 1; l-- > 0;) {
        const Eigen::Index rows = dims[l + 1];
        const Eigen::Index cols = dims[l];
        const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets[l], rows, cols);
        Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offsets[l], rows, cols);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets[l] + rows * cols, rows);
        const Eigen::VectorXd& a = cache.activations[l];
        gw.noalias() += delta * a.transpose();
        gb += delta;
        if (l > 0) delta = ((w.transpose() * delta).array() * (1.0 - a.array().square())).matrix();
    }
}

Eigen::MatrixXd head_probabilities(const Eigen::VectorXd& logits, const MlpShape& shape) {
    Eigen::MatrixXd p = Eigen::Map<const Eigen::MatrixXd>(logits.data(), shape.categories, shape.heads);
    for (Eigen::Index h = 0; h < p.cols(); ++h) {
        auto col = p.col(h);
        col = (col.array() - col.maxCoeff()).exp().matrix();
        col /= col.sum();
    }
    return p;
}

double action_log_prob(const Eigen::MatrixXd& probs, const GenAction& action) {
    double lp = 0.0;
    for (Eigen::Index h = 0; h < probs.cols(); ++h) lp += std::log(probs(action.deltas[static_cast<std::size_t>(h)], h));
    return lp;
}

double policy_entropy(const Eigen::MatrixXd& probs) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        const double p = probs.data()[i];
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

namespace {

// d/dlogits of logp_coef * log pi(action) + entropy_coef * H.
Eigen::VectorXd weighted_dlogits(const Eigen::MatrixXd& probs, const GenAction& action, double logp_coef,
                                 double entropy_coef) {
    Eigen::MatrixXd d = -logp_coef * probs;
    for (Eigen::Index h = 0; h < probs.cols(); ++h) {
        d(action.deltas[static_cast<std::size_t>(h)], h) += logp_coef;
        if (entropy_coef != 0.0) {
            const auto p = probs.col(h).array();
            const Eigen::ArrayXd logp = p.max(1e-300).log();
            const double head_entropy = -(p * logp).sum();
            d.col(h).array() -= entropy_coef * p * (logp + head_entropy);
        }
    }
    return Eigen::Map<const Eigen::VectorXd>(d.data(), d.size());
}

}  // namespace

Eigen::VectorXd log_prob_entropy_dlogits(const Eigen::MatrixXd& probs, const GenAction& action,
                                         double entropy_coef) {
    return weighted_dlogits(probs, action, 1.0, entropy_coef);
}

PolicySnapshot init_policy(std::uint64_t seed, std::vector<int> hidden, double init_scale) {
    MlpShape shape;
    shape.hidden = std::move(hidden);
    PolicySnapshot s;
    s.net = Mlp::init(seed, shape, init_scale);
    s.adam.m = Eigen::VectorXd::Zero(s.net.params().size());
    s.adam.v = Eigen::VectorXd::Zero(s.net.params().size());
    s.rng_seed = seed;
    return s;
}

PolicyDecision policy_step(const PolicySnapshot& policy, std::span<const double> obs, Rng& rng, bool greedy) {
    const auto x = as_vector(obs, policy.net.shape().input);
    const Eigen::MatrixXd probs = head_probabilities(policy.net.forward(x), policy.net.shape());
    if (probs.cols() != static_cast<Eigen::Index>(kNumActionHeads) ||
        probs.rows() != static_cast<Eigen::Index>(kNumCategories)) {
        throw std::invalid_argument("policy shape does not match the action space");
    }
    PolicyDecision out;
    for (Eigen::Index h = 0; h < probs.cols(); ++h) {
        Eigen::Index choice = 0;
        if (greedy) {
            probs.col(h).maxCoeff(&choice);
        } else {
            const double u = rng.uniform();
            double acc = 0.0;
            choice = probs.rows() - 1;
            for (Eigen::Index c = 0; c < probs.rows(); ++c) {
                acc += probs(c, h);
                if (u < acc) {
                    choice = c;
                    break;
                }
            }
        }
        out.action.deltas[static_cast<std::size_t>(h)] = static_cast<std::uint8_t>(choice);
    }
    out.log_prob = action_log_prob(probs, out.action);
    return out;
}

Eigen::VectorXd log_prob_gradient(const Mlp& net, std::span<const double> obs, const GenAction& action,
                                  double entropy_coef) {
    const auto x = as_vector(obs, net.shape().input);
    Mlp::Cache cache;
    const Eigen::MatrixXd probs = head_probabilities(net.forward(x, cache), net.shape());
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.params().size());
    net.backward(cache, log_prob_entropy_dlogits(probs, action, entropy_coef), grad);
    return grad;
}

Eigen::VectorXd policy_gradient(const Mlp& net, std::span<const Transition> batch,
                                std::span<const double> advantages, double entropy_coef, double* mean_abs_logit,
                                double* mean_entropy) {
    if (batch.size() != advantages.size()) throw std::invalid_argument("one advantage per transition required");
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.params().size());
    double abs_logit = 0.0;
    double entropy = 0.0;
    Mlp::Cache cache;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Eigen::Map<const Eigen::VectorXd> x(batch[i].obs.data(), static_cast<Eigen::Index>(batch[i].obs.size()));
        const Eigen::VectorXd logits = net.forward(x, cache);
        abs_logit += logits.cwiseAbs().mean();
        const Eigen::MatrixXd probs = head_probabilities(logits, net.shape());
        entropy += policy_entropy(probs);
        net.backward(cache, weighted_dlogits(probs, batch[i].action, advantages[i], entropy_coef), grad);
    }
    const double n = batch.empty() ? 1.0 : static_cast<double>(batch.size());
    if (mean_abs_logit) *mean_abs_logit = abs_logit / n;
    if (mean_entropy) *mean_entropy = entropy / n;
    return grad / n;
}

void TrainHyperparams::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "learning_rate must be positive");
    if (!(entropy_coef >= 0.0)) throw ConfigError("entropy_coef", "entropy_coef must be ≥ 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma", "gamma must lie in [0, 1]");
    if (!(baseline_decay > 0.0 && baseline_decay <= 1.0)) {
        throw ConfigError("baseline_decay", "baseline_decay must lie in (0, 1]");
    }
    if (episodes_per_update < 1) throw ConfigError("episodes_per_update", "episodes_per_update must be ≥ 1");
    if (curve_interval < 1) throw ConfigError("curve_interval", "curve_interval must be ≥ 1");
    if (hidden.empty()) throw ConfigError("hidden", "at least one hidden layer is required");
}

void to_json(nlohmann::json& j, const TrainHyperparams& h) {
    j = {{"hidden", h.hidden},
         {"learning_rate", h.learning_rate},
         {"entropy_coef", h.entropy_coef},
         {"gamma", h.gamma},
         {"baseline_decay", h.baseline_decay},
         {"normalize_advantages", h.normalize_advantages},
         {"episodes_per_update", h.episodes_per_update},
         {"adam_beta1", h.adam_beta1},
         {"adam_beta2", h.adam_beta2},
         {"adam_eps", h.adam_eps},
         {"init_scale", h.init_scale},
         {"max_mean_abs_logit", h.max_mean_abs_logit},
         {"curve_interval", h.curve_interval}};
}

void from_json(const nlohmann::json& j, TrainHyperparams& h) {
    h = TrainHyperparams{};
    h.hidden = j.value("hidden", h.hidden);
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.entropy_coef = j.value("entropy_coef", h.entropy_coef);
    h.gamma = j.value("gamma", h.gamma);
    h.baseline_decay = j.value("baseline_decay", h.baseline_decay);
    h.normalize_advantages = j.value("normalize_advantages", h.normalize_advantages);
    h.episodes_per_update = j.value("episodes_per_update", h.episodes_per_update);
    h.adam_beta1 = j.value("adam_beta1", h.adam_beta1);
    h.adam_beta2 = j.value("adam_beta2", h.adam_beta2);
    h.adam_eps = j.value("adam_eps", h.adam_eps);
    h.init_scale = j.value("init_scale", h.init_scale);
    h.max_mean_abs_logit = j.value("max_mean_abs_logit", h.max_mean_abs_logit);
    h.curve_interval = j.value("curve_interval", h.curve_interval);
}

TrainResult train(EpisodicEnv& env, long total_steps, const TrainHyperparams& hp, std::uint64_t seed,
                  const TrainOutputs& outputs) {
    if (total_steps < 1) throw std::invalid_argument("total_steps must be ≥ 1");
    hp.validate();
    TrainResult result;
    PolicySnapshot& policy = result.policy;
    policy = init_policy(derive_seed(seed, "policy_init"), hp.hidden, hp.init_scale);
    policy.rng_seed = seed;
    Rng action_rng(derive_seed(seed, "actions"));
    const std::uint64_t episode_seeds = derive_seed(seed, "episodes");

    const auto horizon = static_cast<std::size_t>(env.horizon());
    std::vector<double> baseline(horizon, 0.0);
    double adv_sq = 0.0;
    bool adv_sq_init = false;
    long steps = 0;
    std::uint64_t episode = 0;
    long next_record = hp.curve_interval;
    double acc_return = 0.0;
    double acc_error = 0.0;
    double acc_entropy = 0.0;
    int acc_episodes = 0;
    int acc_updates = 0;

    while (steps < total_steps) {
        std::vector<Transition> batch;
        std::vector<double> returns;
        for (int e = 0; e < hp.episodes_per_update && steps < total_steps; ++e) {
            GenObservation obs = env.reset(derive_seed(episode_seeds, episode++));
            const std::size_t first = batch.size();
            double undiscounted = 0.0;
            double last_error = 0.0;
            for (std::size_t t = 0; t < horizon && steps < total_steps; ++t) {
                const PolicyDecision d = policy_step(policy, obs, action_rng);
                StepResult r = env.step(d.action);
                batch.push_back({obs, d.action, r.reward, d.log_prob, static_cast<int>(t)});
                undiscounted += r.reward;
                last_error = r.info.l_t;
                obs = r.obs;
                ++steps;
                if (r.done) break;
            }
            std::vector<double> g(batch.size() - first);
            double running = 0.0;
            for (std::size_t i = g.size(); i-- > 0;) {
                running = batch[first + i].reward + hp.gamma * running;
                g[i] = running;
            }
            returns.insert(returns.end(), g.begin(), g.end());
            acc_return += undiscounted;
            acc_error += last_error;
            ++acc_episodes;
        }

        std::vector<double> adv(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) adv[i] = returns[i] - baseline[static_cast<std::size_t>(batch[i].t)];
        for (std::size_t i = 0; i < batch.size(); ++i) {
            double& b = baseline[static_cast<std::size_t>(batch[i].t)];
            b += hp.baseline_decay * (returns[i] - b);
        }
        if (hp.normalize_advantages) {
            // Running RMS rather than per-batch statistics: a batch without any
            // winrate change then yields a small update instead of unit-scale noise.
            double sq = 0.0;
            for (double a : adv) sq += a * a;
            if (!adv.empty()) {
                sq /= static_cast<double>(adv.size());
                adv_sq = adv_sq_init ? adv_sq + hp.baseline_decay * (sq - adv_sq) : sq;
                adv_sq_init = true;
            }
            const double scale = std::sqrt(adv_sq);
            for (double& a : adv) a = scale > 1e-12 ? a / scale : 0.0;
        }

        double mean_abs_logit = 0.0;
        double mean_entropy = 0.0;
        const Eigen::VectorXd grad =
            policy_gradient(policy.net, batch, adv, hp.entropy_coef, &mean_abs_logit, &mean_entropy);
        if (!std::isfinite(mean_abs_logit) || mean_abs_logit > hp.max_mean_abs_logit || !grad.allFinite()) {
            throw TrainingDiverged("training diverged at step " + std::to_string(steps) + ": mean |logit| " +
                                   std::to_string(mean_abs_logit));
        }
        AdamState& adam = policy.adam;
        ++adam.t;
        adam.m = hp.adam_beta1 * adam.m + (1.0 - hp.adam_beta1) * grad;
        adam.v = hp.adam_beta2 * adam.v + (1.0 - hp.adam_beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(hp.adam_beta1, static_cast<double>(adam.t));
        const double c2 = 1.0 - std::pow(hp.adam_beta2, static_cast<double>(adam.t));
        policy.net.params().array() +=
            hp.learning_rate * (adam.m.array() / c1) / ((adam.v.array() / c2).sqrt() + hp.adam_eps);
        if (!policy.net.params().allFinite()) throw TrainingDiverged("non-finite weights at step " + std::to_string(steps));
        policy.step_count = steps;

        acc_entropy += mean_entropy;
        ++acc_updates;
        if (steps >= next_record || steps == total_steps) {
            CurvePoint p;
            p.step = steps;
            p.mean_return = acc_episodes ? acc_return / acc_episodes : 0.0;
            p.mean_winrate_error = acc_episodes ? acc_error / acc_episodes : 0.0;
            p.entropy = acc_updates ? acc_entropy / acc_updates : 0.0;
            result.curve.push_back(p);
            spdlog::debug("step {}: return {:.4f} |goal-winrate| {:.4f} entropy {:.4f}", p.step, p.mean_return,
                          p.mean_winrate_error, p.entropy);
            acc_return = acc_error = acc_entropy = 0.0;
            acc_episodes = acc_updates = 0;
            while (next_record <= steps) next_record += hp.curve_interval;
        }
    }

    if (!outputs.checkpoint_path.empty()) save_checkpoint(policy, outputs.checkpoint_path);
    if (!outputs.curve_path.empty()) write_training_curve(result.curve, outputs.curve_path);
    return result;
}

void write_training_curve(const TrainingCurve& curve, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "step,mean_return,mean_winrate_error,entropy\n";
    for (const auto& p : curve) out << p.step << ',' << p.mean_return << ',' << p.mean_winrate_error << ',' << p.entropy << '\n';
}

TrainingCurve read_training_curve(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "step,mean_return,mean_winrate_error,entropy") throw std::runtime_error("unexpected curve header in " + path.string());
    TrainingCurve curve;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        CurvePoint p;
        char comma = 0;
        row >> p.step >> comma >> p.mean_return >> comma >> p.mean_winrate_error >> comma >> p.entropy;
        if (!row) throw std::runtime_error("malformed curve row in " + path.string() + ": " + line);
        curve.push_back(p);
    }
    return curve;
}

nlohmann::json checkpoint_to_json(const PolicySnapshot& policy) {
    const MlpShape& s = policy.net.shape();
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"format", "chatpcg-policy"},
            {"version", 1},
            {"shape", {{"input", s.input}, {"hidden", s.hidden}, {"heads", s.heads}, {"categories", s.categories}}},
            {"n_params", policy.net.params().size()},
            {"rng_seed", policy.rng_seed},
            {"step_count", policy.step_count},
            {"params", vec(policy.net.params())},
            {"adam", {{"t", policy.adam.t}, {"m", vec(policy.adam.m)}, {"v", vec(policy.adam.v)}}}};
}

PolicySnapshot checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "chatpcg-policy") throw std::runtime_error("not a policy checkpoint");
    if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported checkpoint version");
    MlpShape shape;
    const auto& js = j.at("shape");
    shape.input = js.at("input").get<int>();
    shape.hidden = js.at("hidden").get<std::vector<int>>();
    shape.heads = js.at("heads").get<int>();
    shape.categories = js.at("categories").get<int>();
    PolicySnapshot s;
    s.net = Mlp(shape);
    auto load = [&](const nlohmann::json& arr, Eigen::VectorXd& out) {
        const auto v = arr.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(v.size()) != shape.n_params()) {
            throw std::runtime_error("checkpoint holds " + std::to_string(v.size()) + " values, shape needs " +
                                     std::to_string(shape.n_params()));
        }
        out = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    };
    load(j.at("params"), s.net.params());
    load(j.at("adam").at("m"), s.adam.m);
    load(j.at("adam").at("v"), s.adam.v);
    s.adam.t = j.at("adam").at("t").get<long>();
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    s.step_count = j.at("step_count").get<long>();
    if (!s.net.params().allFinite()) throw std::runtime_error("checkpoint holds non-finite weights");
    return s;
}

void save_checkpoint(const PolicySnapshot& policy, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << checkpoint_to_json(policy).dump() << '\n';
}

PolicySnapshot load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return checkpoint_from_json(nlohmann::json::parse(in));
}

// ---------------------------------------------------------------------------

TeamConfig RandomAgent::generate(std::uint64_t seed) {
    Rng rng(seed);
    return sim_.random_team(rng);
}

HeuristicAgent::HeuristicAgent(GameConfig game, HeuristicConfig config) : sim_(std::move(game)), config_(config) {
    if (!(config_.goal >= 0.0 && config_.goal <= 1.0)) throw ConfigError("goal", "goal must lie in [0, 1]");
    if (config_.budget < 0) throw ConfigError("budget", "budget must be ≥ 0");
    if (config_.n_episodes < 1) throw ConfigError("n_episodes", "n_episodes must be ≥ 1");
}

HillClimbResult HeuristicAgent::climb(std::uint64_t seed) const {
    Rng rng(derive_seed(seed, "team"));
    const std::uint64_t episodes = derive_seed(seed, "episodes");
    const GameConfig& game = sim_.config();
    auto error = [&](const TeamConfig& t) {
        return std::fabs(config_.goal - sim_.estimate_winrate(t, config_.n_episodes, episodes).winrate);
    };
    HillClimbResult out;
    out.initial = out.team = sim_.random_team(rng);
    out.initial_error = out.final_error = error(out.team);
    while (out.accepted < config_.budget && out.final_error > 0.0) {
        std::vector<TeamConfig> best;
        double best_error = out.final_error;
        for (std::size_t i = 0; i < kNumPlayers; ++i) {
            for (Property p : kAllProperties) {
                const Bounds b = game.bounds_for(Role::Player, out.team.players[i].skill_type, p);
                for (double sign : {-1.0, 1.0}) {
                    TeamConfig candidate = out.team;
                    double& v = candidate.players[i][p];
                    const double moved = b.clamp(v + sign * config_.step * b.width());
                    if (moved == v) continue;
                    v = moved;
                    const double e = error(candidate);
                    if (e < best_error) {
                        best_error = e;
                        best.clear();
                    }
                    if (e == best_error && (e < out.final_error || config_.plateau_moves)) best.push_back(std::move(candidate));
                }
            }
        }
        if (best.empty()) break;
        out.team = best[rng.below(best.size())];
        out.final_error = best_error;
        ++out.accepted;
    }
    return out;
}

PolicyAgent::PolicyAgent(PolicySnapshot policy, GameConfig game, GenEnvConfig env_config, bool greedy)
    : policy_(std::move(policy)),
      // Observations do not depend on playtest results, so one episode per step suffices.
      env_(std::move(game), [&] {
          env_config.n_episodes = 1;
          return env_config;
      }(), RewardSpec{}),
      greedy_(greedy) {}

TeamConfig PolicyAgent::generate(std::uint64_t seed) {
    GenObservation obs = env_.reset(seed);
    Rng rng(derive_seed(seed, "policy_actions"));
    while (!env_.done()) obs = env_.step(policy_step(policy_, obs, rng, greedy_).action).obs;
    return env_.state().team;
}

std::vector<ContentSample> sample_contents(ContentGenerator& generator, const Simulator& sim, int n,
                                           int measure_episodes, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample count must be ≥ 1");
    if (measure_episodes < 1) throw std::invalid_argument("measure_episodes must be ≥ 1");
    const std::uint64_t gen_seeds = derive_seed(seed, "generate");
    const std::uint64_t measure_seeds = derive_seed(seed, "measure");
    std::vector<ContentSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::uint64_t>(i);
        TeamConfig team = generator.generate(derive_seed(gen_seeds, idx));
        const double w = sim.estimate_winrate(team, measure_episodes, derive_seed(measure_seeds, idx)).winrate;
        out.push_back({std::move(team), w});
    }
    return out;
}

}  // namespace chatpcg
