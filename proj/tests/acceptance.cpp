// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
#include "chatpcg/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

using namespace chatpcg;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = CHATPCG_SOURCE_DIR;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) detail << "failed: ";
            else detail << "; ";
            detail << what;
            pass = false;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("chatpcg_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool close(double a, double b, double tol = 1e-12) { return std::fabs(a - b) <= tol; }

ContentSample sample_at(double winrate) {
    ContentSample s;
    s.measured_winrate = winrate;
    return s;
}

PropertyValues filled(double v) {
    PropertyValues p{};
    p.fill(v);
    return p;
}

void metric_oracles(Outcome& o) {
    const std::vector<ContentSample> at_goal{sample_at(0.7), sample_at(0.7), sample_at(0.7)};
    o.require(controllability(at_goal, 0.7) == 0.0, "Ctr at goal");
    const std::vector<ContentSample> spread{sample_at(0.5), sample_at(0.9)};
    o.require(close(controllability(spread, 0.7), 0.2), "Ctr {0.5, 0.9} = 0.2");
    const std::vector<ContentSample> zero{sample_at(0.0)};
    o.require(close(controllability(zero, 0.7), 0.7), "Ctr {0.0} = 0.7");

    const std::vector<PropertyValues> same(4, filled(0.37));
    o.require(team_build_score(same) == 0.0, "Tbs identical players = 0 exactly");
    const std::vector<PropertyValues> extremes{filled(0.0), filled(1.0)};
    o.require(team_build_score(extremes) == 1.0, "Tbs min/max players = 1 exactly");
    const std::vector<PropertyValues> three{filled(0.0), filled(1.0), filled(0.5)};
    o.require(close(team_build_score(three), 2.0 / 3.0), "Tbs three players = 2/3");

    o.require(close(hybrid_reward(1.0, 1.0, 0.97, 0.03), 1.0), "hybrid(1, 1) = 1");
    o.require(close(hybrid_reward(0.5, -2.0, 0.97, 0.03), 0.425), "hybrid(0.5, -2) = 0.425");
    for (double r_llm : {-3.0, 0.0, 0.8, 12.0}) {
        o.require(close(hybrid_reward(-0.25, r_llm, 0.97, 0.0), 0.97 * -0.25), "hybrid with w_llm 0");
    }
    o.detail << "Ctr, Tbs and hybrid examples within 1e-12";
}

void pca_correctness(Outcome& o) {
    Rng rng(20240);
    double worst_cos = 1.0;
    double worst_norm = 0.0;
    for (int m = 0; m < 100; ++m) {
        const int n = 10 + static_cast<int>(rng.below(90));
        Eigen::MatrixXd rows(n, 7);
        Eigen::VectorXd scale(7);
        for (int c = 0; c < 7; ++c) scale[c] = rng.uniform(0.1, 3.0);
        for (int r = 0; r < n; ++r) {
            const double shared = rng.uniform(-1.0, 1.0);
            for (int c = 0; c < 7; ++c) rows(r, c) = scale[c] * (rng.uniform(-1.0, 1.0) + 0.5 * shared * (c % 3));
        }
        const PcaResult got = pca_first_component(rows);
        const Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean();
        const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        const Eigen::VectorXd ref = eig.eigenvectors().col(6);
        worst_cos = std::min(worst_cos, std::fabs(got.component.dot(ref)) / ref.norm());
        worst_norm = std::max(worst_norm, std::fabs(got.component.norm() - 1.0));
    }
    o.require(worst_cos > 1.0 - 1e-8, "cosine to eigensolver");
    o.require(worst_norm <= 1e-12, "unit norm");
    o.detail << "100 matrices, min |cos| = 1 - " << 1.0 - worst_cos << ", max |norm - 1| = " << worst_norm;
}

void telescoping(Outcome& o) {
    GenEnv env(GameConfig::defaults(), GenEnvConfig{}, RewardSpec{});
    Rng rng(33);
    double worst = 0.0;
    const int episodes = 20;
    for (int e = 0; e < episodes; ++e) {
        env.reset(derive_seed(7, static_cast<std::uint64_t>(e)));
        const double l0 = env.state().prev_distance;
        double sum = 0.0;
        StepResult r;
        int steps = 0;
        do {
            GenAction a;
            for (auto& d : a.deltas) d = static_cast<std::uint8_t>(rng.below(5));
            r = env.step(a);
            sum += r.reward;
            ++steps;
        } while (!r.done);
        o.require(steps == 40, "episode length 40");
        worst = std::max(worst, std::fabs(sum - (l0 - r.info.l_t)));
    }
    o.require(worst <= 1e-9, "sum of rewards = l_0 - l_40");
    o.detail << episodes << " episodes, max |sum r - (l_0 - l_40)| = " << worst;
}

void dsl_soundness(Outcome& o) {
    std::vector<std::pair<std::string, std::string>> corpus;
    for (const auto& entry : fs::directory_iterator(kSource / "tests" / "fixtures" / "corpus")) {
        std::ifstream in(entry.path());
        std::ostringstream ss;
        ss << in.rdbuf();
        corpus.emplace_back(entry.path().filename().string(), ss.str());
    }
    std::sort(corpus.begin(), corpus.end());
    o.require(corpus.size() >= 20, "corpus has at least 20 programs");
    int fixpoints = 0;
    for (const auto& [name, text] : corpus) {
        try {
            const dsl::RewardProgram p = dsl::parse_program(text);
            const std::string printed = dsl::print_program(p);
            const dsl::RewardProgram q = dsl::parse_program(printed);
            const bool ok = dsl::same_structure(p, q) && dsl::print_program(q) == printed;
            o.require(ok, "round trip of " + name);
            fixpoints += ok;
        } catch (const std::exception& e) {
            o.require(false, name + ": " + e.what());
        }
    }

    Rng rng(99);
    const std::string alphabet = "module weight if and or not ()+-*/<>=,:#.0123456789eE_abcxyz\n\t \x01\xff";
    int positioned = 0;
    int accepted = 0;
    for (int i = 0; i < 1000; ++i) {
        std::string text = corpus[rng.below(corpus.size())].second;
        const int edits = 1 + static_cast<int>(rng.below(8));
        for (int k = 0; k < edits; ++k) {
            const std::size_t at = text.empty() ? 0 : rng.below(text.size());
            switch (rng.below(3)) {
                case 0:
                    if (!text.empty()) text.erase(at, 1 + rng.below(5));
                    break;
                case 1: text.insert(at, 1, alphabet[rng.below(alphabet.size())]); break;
                default:
                    if (!text.empty()) text[at] = alphabet[rng.below(alphabet.size())];
            }
        }
        const int lines = 1 + static_cast<int>(std::count(text.begin(), text.end(), '\n'));
        try {
            dsl::parse_program(text);
            ++accepted;
        } catch (const dsl::ParseError& e) {
            const bool ok = e.pos().line >= 1 && e.pos().line <= lines && e.pos().column >= 1;
            o.require(ok, "fuzz case " + std::to_string(i) + " lacks a valid position");
            positioned += ok;
        } catch (const std::exception& e) {
            o.require(false, "fuzz case " + std::to_string(i) + " threw " + e.what());
        }
    }

    const GameConfig game = GameConfig::defaults();
    const dsl::VariableCatalog catalog = dsl::playtest_catalog(game);
    auto row = [](std::initializer_list<std::pair<const char*, double>> values) {
        PlaytestRow r;
        for (const auto& [name, v] : values) r.values[*playtest_variable_index(name)] = v;
        return r.values;
    };
    struct Case {
        const char* source;
        PlaytestValues values;
        double total;
    };
    const std::vector<Case> cases{
        {"module m weight 1.0: clamp(damage_dealt_p1 / 1000, 0, 1)", row({{"damage_dealt_p1", 500}}), 0.5},
        {"module a weight 0.97: 1\nmodule b weight 0.03: 1", row({}), 1.0},
        {"module m weight 2: 1 - 2 - 3 + 4 * 5 / 8 - -7 * (8 - 9)", row({}), -17.0},
        {"module m weight 0.5: survive_time_p1 / max_episode_time", row({{"survive_time_p1", 150}}), 0.25},
        {"module m weight 1: if(attack_count_p1 > 2 and not (attack_count_p2 > 2), 10, 1)",
         row({{"attack_count_p1", 3}, {"attack_count_p2", 1}}), 10.0},
        {"module a weight 0.25: min(damage_taken_p1, damage_taken_p2, 40)\nmodule b weight -1: max(downtime_p3, 2)",
         row({{"damage_taken_p1", 80}, {"damage_taken_p2", 60}, {"downtime_p3", 7}}), 0.25 * 40 - 7},
    };
    double worst = 0.0;
    for (const auto& c : cases) {
        const double total = dsl::evaluate_program(dsl::parse_program(c.source), dsl::bind_row(c.values, catalog)).total;
        worst = std::max(worst, std::fabs(total - c.total));
    }
    o.require(worst <= 1e-12, "evaluator hand examples");
    o.detail << fixpoints << "/" << corpus.size() << " corpus fixpoints; fuzz: " << positioned
             << " positioned errors, " << accepted << " still valid, no other exceptions; evaluator max error " << worst;
}

int retries_in(const std::vector<CallRecord>& log) {
    int retries = 0;
    for (std::size_t i = 1; i < log.size(); ++i) retries += log[i].role == log[i - 1].role;
    return retries;
}

void pipeline_contract(Outcome& o) {
    const auto dir = scratch("pipeline");
    std::ostringstream sink;
    cli::RunConfig config;
    config.output_dir = dir;
    cli::cmd_collect_logs(config, 200, sink);
    const dsl::VariableCatalog catalog = dsl::playtest_catalog(config.game);

    cli::DesignRewardOptions cot;
    cot.mode = PipelineMode::Cot;
    cot.backend = "scripted";
    const auto t0 = Clock::now();
    const auto result = cli::cmd_design_reward(config, cot, sink);
    const double secs = seconds_since(t0);
    const PipelineTranscript& t = result.transcript;
    o.require(t.iterations.size() == 5, "5 iterations");
    for (const auto& it : t.iterations) {
        o.require(dsl::validate(dsl::parse_program(it.program_source), catalog).empty(), "intermediate program validates");
    }
    o.require(dsl::validate(t.final_program, catalog).empty(), "final program validates");
    const int retries = retries_in(t.backend_call_log);
    const std::size_t calls = t.backend_call_log.size();
    o.require(calls == static_cast<std::size_t>(2 + 2 * 5 + retries), "call count = 2 + 2*5 + retries");
    o.require(secs < 5.0, "wall time < 5 s");

    // One malformed program reply forces a logged repair retry.
    auto designer = canned_designer();
    bool broke = false;
    ScriptedBackend flaky([&](const Conversation& conv, int idx) {
        if (conv.stage == "program" && !broke) {
            broke = true;
            return std::string("module x weight: 1");
        }
        return designer(conv, idx);
    });
    PipelineConfig pc = PipelineConfig::defaults(config.game);
    const PipelineTranscript retried = run_pipeline(flaky, pc, read_playtest_jsonl(cli::RunLayout{dir}.dataset()));
    const int flaky_retries = retries_in(retried.backend_call_log);
    o.require(flaky_retries == 1, "malformed reply logged as one retry");
    o.require(retried.backend_call_log.size() == static_cast<std::size_t>(2 + 2 * 5 + flaky_retries),
              "call count with a retry = 2 + 2*5 + retries");

    cli::DesignRewardOptions io = cot;
    io.mode = PipelineMode::Io;
    const auto io_result = cli::cmd_design_reward(config, io, sink);
    o.require(io_result.transcript.iterations.empty(), "io mode has 0 iterations");
    o.detail << "cot: " << t.iterations.size() << " iterations, " << calls << " calls (" << retries << " retries), "
             << secs << " s; with one injected malformed reply " << retried.backend_call_log.size()
             << " calls; io: " << io_result.transcript.iterations.size() << " iterations";
    fs::remove_all(dir);
}

void training_efficacy(Outcome& o) {
    const auto dir = scratch("training");
    std::ostringstream sink;
    cli::RunConfig config;
    config.output_dir = dir;
    config.env.n_episodes = 8;
    const auto t0 = Clock::now();
    cli::TrainOptions train_opts;
    train_opts.reward = RewardKind::Winrate;
    train_opts.steps = 2000;
    train_opts.runs = 3;
    const auto trained = cli::cmd_train(config, train_opts, sink);

    cli::EvaluateOptions policy_eval;
    policy_eval.agent = cli::AgentKind::Checkpoint;
    for (const auto& run : trained.runs) policy_eval.checkpoints.push_back(run.checkpoint);
    const auto policy_reports = cli::cmd_evaluate(config, policy_eval, sink);
    cli::EvaluateOptions random_eval;
    random_eval.agent = cli::AgentKind::Random;
    random_eval.runs = 3;
    const auto random_reports = cli::cmd_evaluate(config, random_eval, sink);
    const double secs = seconds_since(t0);

    int wins = 0;
    for (std::size_t k = 0; k < policy_reports.size(); ++k) {
        const double trained_ctr = policy_reports[k].report.ctr;
        const double random_ctr = random_reports.at(k).report.ctr;
        wins += trained_ctr < random_ctr;
        o.detail << "seed " << k << ": trained " << trained_ctr << " vs random " << random_ctr << "; ";
    }
    o.require(wins == 3, "trained Ctr below random Ctr in 3/3 seeds");
    o.require(secs < 15 * 60, "runtime under 15 minutes");
    o.detail << wins << "/3 seeds, " << secs << " s";
    fs::remove_all(dir);
}

void gradient_check(Outcome& o) {
    Rng rng(4242);
    double worst = 0.0;
    for (const std::vector<int>& hidden : {std::vector<int>{8}, std::vector<int>{32, 16}, std::vector<int>{64, 64}}) {
        MlpShape shape;
        shape.hidden = hidden;
        Mlp net = Mlp::init(rng.next_u64(), shape, 3.0);
        GenObservation obs{};
        for (double& v : obs) v = rng.uniform(0.0, 1.0);
        GenAction a;
        for (auto& d : a.deltas) d = static_cast<std::uint8_t>(rng.below(5));
        for (double coef : {0.0, 0.01}) {
            const Eigen::VectorXd g = log_prob_gradient(net, obs, a, coef);
            const Eigen::Map<const Eigen::VectorXd> x(obs.data(), static_cast<Eigen::Index>(obs.size()));
            auto f = [&] {
                const Eigen::MatrixXd p = head_probabilities(net.forward(x), shape);
                return action_log_prob(p, a) + coef * policy_entropy(p);
            };
            const double h = 1e-4;
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                const double keep = net.params()[i];
                net.params()[i] = keep + h;
                const double up = f();
                net.params()[i] = keep - h;
                const double down = f();
                net.params()[i] = keep;
                const double fd = (up - down) / (2.0 * h);
                worst = std::max(worst, std::fabs(fd - g[i]) / std::max({std::fabs(fd), std::fabs(g[i]), 1e-6}));
            }
        }
    }
    o.require(worst <= 1e-4, "relative error ≤ 1e-4");
    o.detail << "nets {8}, {32,16}, {64,64}; max relative error " << worst;
}

void simulator_checks(Outcome& o) {
    GameConfig g = GameConfig::defaults();
    g.max_ticks = 300;
    const Simulator sim(g);
    LogSamplingConfig sampling;
    sampling.seed = 1234;
    std::ostringstream a, b;
    write_playtest_jsonl(collect_log_dataset(sim, 300, sampling), a);
    write_playtest_jsonl(collect_log_dataset(sim, 300, sampling), b);
    o.require(a.str() == b.str(), "identical seeds give byte-identical JSONL");

    Rng rng(5);
    std::vector<TeamConfig> teams;
    for (int i = 0; i < 64; ++i) teams.push_back(sim.random_team(rng));
    const int n = 3000;
    const auto t0 = Clock::now();
    for (int i = 0; i < n; ++i) sim.run_episode(teams[static_cast<std::size_t>(i) % teams.size()], static_cast<std::uint64_t>(i));
    const double rate = n / seconds_since(t0);
    o.require(rate >= 500.0, "throughput ≥ 500 episodes/s");

    // Boss armor 1 negates every hit, so the players deal zero damage.
    int zero_wins = 0;
    for (int i = 0; i < 20; ++i) {
        TeamConfig team = sim.random_team(rng);
        team.boss[Property::Armor] = 1.0;
        const PlaytestSummary s = sim.estimate_winrate(team, 10, rng.next_u64());
        zero_wins += s.wins;
        o.require(s.winrate == 0.0 && s.n_episodes == 10, "zero-damage team winrate exactly 0");
    }
    o.detail << "byte-identical JSONL, " << static_cast<long>(rate) << " episodes/s at max_ticks=300, " << zero_wins
             << " wins over 20 zero-damage teams x 10 episodes";
}

// Every team is one random character copied into all four slots.
class IdenticalTeamGenerator final : public ContentGenerator {
public:
    explicit IdenticalTeamGenerator(GameConfig game) : sim_(std::move(game)) {}
    std::string name() const override { return "identical"; }
    TeamConfig generate(std::uint64_t seed) override {
        Rng rng(seed);
        TeamConfig team = sim_.random_team(rng);
        for (std::size_t i = 1; i < kNumPlayers; ++i) {
            team.players[i] = team.players[0];
            team.players[i].agent_id = static_cast<int>(i);
        }
        return team;
    }

private:
    Simulator sim_;
};

void end_to_end(Outcome& o) {
    const auto dir = scratch("smoke");
    std::ostringstream sink;
    cli::RunConfig config;
    config.output_dir = dir;
    cli::cmd_collect_logs(config, 200, sink);

    cli::DesignRewardOptions design;
    design.backend = "replay";
    design.mode = PipelineMode::Cot;
    design.replay_file = kSource / "tests" / "fixtures" / "replay_cot_session.json";
    const auto designed = cli::cmd_design_reward(config, design, sink);

    cli::TrainOptions train_opts;
    train_opts.reward = RewardKind::Llm;
    train_opts.program = designed.program_path;
    train_opts.steps = 500;
    const auto trained = cli::cmd_train(config, train_opts, sink);

    cli::EvaluateOptions eval;
    eval.agent = cli::AgentKind::Checkpoint;
    eval.samples = 200;
    for (const auto& run : trained.runs) eval.checkpoints.push_back(run.checkpoint);
    cli::cmd_evaluate(config, eval, sink);
    const cli::ReportResult report = cli::cmd_report(config, {}, sink);

    const cli::ReportRow* row = nullptr;
    for (const auto& r : report.rows) {
        if (r.generator == "policy" && r.reward == "llm" && r.pe_mode == "cot") row = &r;
    }
    o.require(row != nullptr, "report has a policy/cot/llm row");
    o.require(fs::exists(report.table_csv) && fs::exists(report.table_text), "table files written");

    const Simulator sim(config.game);
    IdenticalTeamGenerator degenerate(config.game);
    const auto samples = sample_contents(degenerate, sim, 200, config.eval.measure_episodes, 17);
    const double degenerate_tbs = evaluate_generator(samples, 0.7, 0.4, config.game).tbs;
    o.require(degenerate_tbs == 0.0, "degenerate generator Tbs is 0");
    if (row != nullptr) {
        o.require(row->tbs.mean > degenerate_tbs, "llm policy Tbs exceeds degenerate Tbs");
        o.detail << "row: Ctr " << row->ctr.mean << " ± " << row->ctr.sd << ", Div " << row->div.mean << ", Tbs "
                 << row->tbs.mean << " vs degenerate " << degenerate_tbs;
    }
    fs::remove_all(dir);
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"metric oracles", metric_oracles},
        {"PCA correctness", pca_correctness},
        {"winrate-reward telescoping", telescoping},
        {"DSL soundness", dsl_soundness},
        {"pipeline contract", pipeline_contract},
        {"training efficacy", training_efficacy},
        {"gradient check", gradient_check},
        {"simulator", simulator_checks},
        {"end-to-end smoke", end_to_end},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << " (" << std::fixed
                  << std::setprecision(1) << seconds_since(t0) << " s): " << std::defaultfloat << o.detail.str()
                  << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
