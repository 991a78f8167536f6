#pragma once

#include "chatpcg/simulator.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace chatpcg {

struct ContentSample {
    TeamConfig team;
    double measured_winrate = 0.0;
};

nlohmann::json to_json(const ContentSample& s);
ContentSample content_sample_from_json(const nlohmann::json& j);
void write_content_samples(const std::vector<ContentSample>& samples, const std::filesystem::path& path);
std::vector<ContentSample> read_content_samples(const std::filesystem::path& path);

// Mean |goal - winrate| over all samples.
double controllability(std::span<const ContentSample> samples, double goal);

// Keeps samples with |goal - winrate| <= threshold.
std::vector<ContentSample> valid_filter(std::span<const ContentSample> samples, double goal, double threshold);

struct PcaResult {
    Eigen::VectorXd component;  // unit norm, first nonzero entry positive
    double eigenvalue = 0.0;
    bool degenerate = false;  // zero covariance; component is all zeros
    int iterations = 0;
};

// Dominant eigenvector of the column covariance of `rows` (N x d, N >= 2).
// Repeated squaring of the normalized covariance gives the start vector for
// the power iteration.
PcaResult pca_first_component(const Eigen::MatrixXd& rows, double tolerance = 1e-9, int max_iterations = 1000);

struct DiversityResult {
    double value = 0.0;
    std::size_t n_rows = 0;
    bool no_valid_samples = false;
    bool degenerate = false;
};

// Population std of the PC1 projections of every valid sample's normalized
// player rows.
DiversityResult diversity(std::span<const ContentSample> samples, double goal, double threshold,
                          const GameConfig& game);

// Mean over player pairs of the mean absolute normalized property difference.
double team_build_score(std::span<const PropertyValues> normalized_players);
double team_build_score(const TeamConfig& team, const GameConfig& game);

struct EvalReport {
    std::string generator;
    std::string reward;  // reward kind for trained policies, empty for baselines
    std::string pe_mode;
    double ctr = 0.0;
    double div = 0.0;
    double tbs = 0.0;
    int n_samples = 0;
    int n_valid = 0;
    double goal = 0.7;
    double validity_threshold = 0.4;
    bool diversity_warning = false;
};

// Ctr over all samples, Div and mean Tbs over valid samples only.
EvalReport evaluate_generator(std::span<const ContentSample> samples, double goal, double threshold,
                              const GameConfig& game);

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);
std::string eval_report_csv_header();
std::string eval_report_csv_row(const EvalReport& r);

}  // namespace chatpcg
