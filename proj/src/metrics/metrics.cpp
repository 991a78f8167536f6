#include "chatpcg/metrics.hpp"

#include "chatpcg/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace chatpcg {

nlohmann::json to_json(const ContentSample& s) {
    return {{"team", s.team}, {"winrate", s.measured_winrate}};
}

ContentSample content_sample_from_json(const nlohmann::json& j) {
    ContentSample s;
    s.team = j.at("team").get<TeamConfig>();
    s.measured_winrate = j.at("winrate").get<double>();
    if (!(s.measured_winrate >= 0.0 && s.measured_winrate <= 1.0)) {
        throw std::invalid_argument("content sample winrate outside [0, 1]");
    }
    return s;
}

void write_content_samples(const std::vector<ContentSample>& samples, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

std::vector<ContentSample> read_content_samples(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<ContentSample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(content_sample_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

double controllability(std::span<const ContentSample> samples, double goal) {
    if (samples.empty()) throw std::invalid_argument("controllability needs at least one sample");
    double sum = 0.0;
    for (const auto& s : samples) sum += std::fabs(goal - s.measured_winrate);
    return sum / static_cast<double>(samples.size());
}

std::vector<ContentSample> valid_filter(std::span<const ContentSample> samples, double goal, double threshold) {
    if (threshold < 0.0) throw std::invalid_argument("validity threshold must be ≥ 0");
    std::vector<ContentSample> out;
    for (const auto& s : samples) {
        if (std::fabs(goal - s.measured_winrate) <= threshold) out.push_back(s);
    }
    return out;
}

PcaResult pca_first_component(const Eigen::MatrixXd& rows, double tolerance, int max_iterations) {
    if (rows.rows() < 2) throw std::invalid_argument("pca needs at least two rows");
    const Eigen::Index d = rows.cols();
    PcaResult out;
    out.component = Eigen::VectorXd::Zero(d);

    const bool identical = (rows.rowwise() - rows.row(0)).cwiseAbs().maxCoeff() == 0.0;
    const Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(rows.rows());
    const double trace = cov.trace();
    if (identical || !(trace > 0.0)) {
        out.degenerate = true;
        return out;
    }

    Eigen::MatrixXd b = cov / trace;
    for (int k = 0; k < 30; ++k) {
        b = b * b;
        const double t = b.trace();
        if (!(t > 0.0)) break;
        b /= t;
    }
    Eigen::Index best = 0;
    b.colwise().norm().maxCoeff(&best);
    Eigen::VectorXd v = b.col(best);
    if (!(v.norm() > 0.0)) v = cov.col(best);
    v.normalize();

    for (out.iterations = 1; out.iterations <= max_iterations; ++out.iterations) {
        Eigen::VectorXd next = cov * v;
        const double n = next.norm();
        if (!(n > 0.0)) break;
        next /= n;
        if (next.dot(v) < 0.0) next = -next;
        const double change = (next - v).norm();
        v = next;
        if (change < tolerance) break;
    }
    out.iterations = std::min(out.iterations, max_iterations);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (v[i] != 0.0) {
            if (v[i] < 0.0) v = -v;
            break;
        }
    }
    v.normalize();
    out.component = v;
    out.eigenvalue = v.dot(cov * v);
    return out;
}

DiversityResult diversity(std::span<const ContentSample> samples, double goal, double threshold,
                          const GameConfig& game) {
    DiversityResult out;
    const auto valid = valid_filter(samples, goal, threshold);
    if (valid.empty()) {
        out.no_valid_samples = true;
        spdlog::warn("diversity: no valid samples within {} of goal {}", threshold, goal);
        return out;
    }
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(valid.size() * kNumPlayers), static_cast<Eigen::Index>(kNumProperties));
    Eigen::Index r = 0;
    for (const auto& s : valid) {
        for (const auto& p : s.team.players) {
            const PropertyValues norm = game.normalized(p);
            for (std::size_t k = 0; k < kNumProperties; ++k) rows(r, static_cast<Eigen::Index>(k)) = norm[k];
            ++r;
        }
    }
    out.n_rows = static_cast<std::size_t>(rows.rows());
    const PcaResult pc = pca_first_component(rows);
    if (pc.degenerate) {
        out.degenerate = true;
        return out;
    }
    const Eigen::VectorXd proj = rows * pc.component;
    const double mean = proj.mean();
    out.value = std::sqrt((proj.array() - mean).square().sum() / static_cast<double>(proj.size()));
    return out;
}

double team_build_score(std::span<const PropertyValues> players) {
    if (players.size() < 2) throw std::invalid_argument("team build score needs at least two players");
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < players.size(); ++i) {
        for (std::size_t j = i + 1; j < players.size(); ++j) {
            double d = 0.0;
            for (std::size_t k = 0; k < kNumProperties; ++k) d += std::fabs(players[i][k] - players[j][k]);
            sum += d / static_cast<double>(kNumProperties);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

double team_build_score(const TeamConfig& team, const GameConfig& game) {
    std::array<PropertyValues, kNumPlayers> norm;
    for (std::size_t i = 0; i < kNumPlayers; ++i) norm[i] = game.normalized(team.players[i]);
    return team_build_score(norm);
}

EvalReport evaluate_generator(std::span<const ContentSample> samples, double goal, double threshold,
                              const GameConfig& game) {
    if (samples.empty()) throw std::invalid_argument("evaluate_generator needs at least one sample");
    EvalReport r;
    r.goal = goal;
    r.validity_threshold = threshold;
    r.n_samples = static_cast<int>(samples.size());
    r.ctr = controllability(samples, goal);
    const auto valid = valid_filter(samples, goal, threshold);
    r.n_valid = static_cast<int>(valid.size());
    const DiversityResult div = diversity(samples, goal, threshold, game);
    r.div = div.value;
    r.diversity_warning = div.no_valid_samples;
    if (!valid.empty()) {
        double sum = 0.0;
        for (const auto& s : valid) sum += team_build_score(s.team, game);
        r.tbs = sum / static_cast<double>(valid.size());
    }
    return r;
}

nlohmann::json to_json(const EvalReport& r) {
    return {{"generator", r.generator},
            {"reward", r.reward},
            {"pe_mode", r.pe_mode},
            {"ctr", r.ctr},
            {"div", r.div},
            {"tbs", r.tbs},
            {"n_samples", r.n_samples},
            {"n_valid", r.n_valid},
            {"goal", r.goal},
            {"validity_threshold", r.validity_threshold},
            {"diversity_warning", r.diversity_warning}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.generator = j.value("generator", "");
    r.reward = j.value("reward", "");
    r.pe_mode = j.value("pe_mode", "");
    r.ctr = j.at("ctr").get<double>();
    r.div = j.at("div").get<double>();
    r.tbs = j.at("tbs").get<double>();
    r.n_samples = j.at("n_samples").get<int>();
    r.n_valid = j.at("n_valid").get<int>();
    r.goal = j.at("goal").get<double>();
    r.validity_threshold = j.at("validity_threshold").get<double>();
    r.diversity_warning = j.value("diversity_warning", false);
    return r;
}

std::string eval_report_csv_header() { return "generator,pe_mode,reward,ctr,div,tbs,n_samples,n_valid,goal,threshold"; }

std::string eval_report_csv_row(const EvalReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << r.generator << ',' << r.pe_mode << ',' << r.reward << ',' << r.ctr << ',' << r.div << ',' << r.tbs << ','
        << r.n_samples << ',' << r.n_valid << ',' << r.goal << ',' << r.validity_threshold;
    return out.str();
}

}  // namespace chatpcg
