#include "chatpcg/cli.hpp"
#include "chatpcg/json_io.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include <openssl/evp.h>

namespace chatpcg::cli {

namespace fs = std::filesystem;

namespace {

const nlohmann::json& section(const nlohmann::json& j, const char* key) {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!j.contains(key)) return empty;
    const auto& s = j.at(key);
    if (!s.is_object()) throw ConfigError(key, std::string("'") + key + "' must be an object");
    return s;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string(), path.string() + ": " + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    env.validate();
    trainer.validate();
    if (pipeline.n_align < 0) throw ConfigError("pipeline.n_align", "n_align must be ≥ 0");
    if (pipeline.m_rows < 1) throw ConfigError("pipeline.m_rows", "m_rows must be ≥ 1");
    if (pipeline.retry_limit < 0) throw ConfigError("pipeline.retry_limit", "retry_limit must be ≥ 0");
    if (pipeline.backend != "http" && pipeline.backend != "replay" && pipeline.backend != "scripted") {
        throw ConfigError("pipeline.backend", "backend must be http, replay or scripted");
    }
    if (train_steps < 1) throw ConfigError("train.steps", "train steps must be ≥ 1");
    if (train_runs < 1) throw ConfigError("train.runs", "train runs must be ≥ 1");
    if (heuristic.budget < 0) throw ConfigError("heuristic.budget", "budget must be ≥ 0");
    if (heuristic.n_episodes < 1) throw ConfigError("heuristic.n_episodes", "n_episodes must be ≥ 1");
    if (!(eval.threshold >= 0.0)) throw ConfigError("eval.threshold", "threshold must be ≥ 0");
    if (eval.samples < 1) throw ConfigError("eval.samples", "samples must be ≥ 1");
    if (eval.measure_episodes < 1) throw ConfigError("eval.measure_episodes", "measure_episodes must be ≥ 1");
    if (log_rows < 1) throw ConfigError("logs.rows", "rows must be ≥ 1");
}

RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("", "run config must be a JSON object");
    RunConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.output_dir = j.value("output_dir", c.output_dir.string());
        c.game_config_path = resolve(base_dir, j.value("game_config", std::string{}));
        if (!c.game_config_path.empty()) {
            if (!fs::exists(c.game_config_path)) {
                throw ConfigError("game_config", "game config not found: " + c.game_config_path.string());
            }
            c.game = read_json_file(c.game_config_path).get<GameConfig>();
        }
        if (j.contains("env")) c.env = j.at("env").get<GenEnvConfig>();

        const auto& p = section(j, "pipeline");
        if (p.contains("mode")) c.pipeline.mode = pipeline_mode_from_string(p.at("mode").get<std::string>());
        c.pipeline.n_align = p.value("n_align", c.pipeline.n_align);
        c.pipeline.m_rows = p.value("m_rows", c.pipeline.m_rows);
        c.pipeline.retry_limit = p.value("retry_limit", c.pipeline.retry_limit);
        c.pipeline.backend = p.value("backend", c.pipeline.backend);
        c.pipeline.http.base_url = p.value("base_url", c.pipeline.http.base_url);
        c.pipeline.http.model = p.value("model", c.pipeline.http.model);
        c.pipeline.http.temperature = p.value("temperature", c.pipeline.http.temperature);
        c.pipeline.http.timeout_seconds = p.value("timeout_seconds", c.pipeline.http.timeout_seconds);
        c.pipeline.http.max_attempts = p.value("max_attempts", c.pipeline.http.max_attempts);
        c.pipeline.http.retry_backoff_seconds = p.value("retry_backoff_seconds", c.pipeline.http.retry_backoff_seconds);
        c.pipeline.replay_file = resolve(base_dir, p.value("replay_file", std::string{}));
        c.pipeline.record_file = p.value("record_file", std::string{});

        const auto& t = section(j, "train");
        if (t.contains("hyperparams")) c.trainer = t.at("hyperparams").get<TrainHyperparams>();
        c.train_steps = t.value("steps", c.train_steps);
        c.train_runs = t.value("runs", c.train_runs);

        const auto& h = section(j, "heuristic");
        c.heuristic.budget = h.value("budget", c.heuristic.budget);
        c.heuristic.n_episodes = h.value("n_episodes", c.heuristic.n_episodes);
        c.heuristic.step = h.value("step", c.heuristic.step);
        c.heuristic.plateau_moves = h.value("plateau_moves", c.heuristic.plateau_moves);

        const auto& e = section(j, "eval");
        c.eval.threshold = e.value("threshold", c.eval.threshold);
        c.eval.samples = e.value("samples", c.eval.samples);
        c.eval.measure_episodes = e.value("measure_episodes", c.eval.measure_episodes);

        c.log_rows = section(j, "logs").value("rows", c.log_rows);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("", std::string("run config: ") + ex.what());
    }
    c.heuristic.goal = c.env.goal_winrate;
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    return run_config_from_json(read_json_file(path), path.parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
    const auto& p = c.pipeline;
    return {{"seed", c.seed},
            {"output_dir", c.output_dir.string()},
            {"game_config", c.game_config_path.string()},
            {"game", c.game},
            {"env", c.env},
            {"pipeline",
             {{"mode", to_string(p.mode)},
              {"n_align", p.n_align},
              {"m_rows", p.m_rows},
              {"retry_limit", p.retry_limit},
              {"backend", p.backend},
              {"base_url", p.http.base_url},
              {"model", p.http.model},
              {"temperature", p.http.temperature},
              {"timeout_seconds", p.http.timeout_seconds},
              {"max_attempts", p.http.max_attempts},
              {"retry_backoff_seconds", p.http.retry_backoff_seconds},
              {"replay_file", p.replay_file.string()},
              {"record_file", p.record_file.string()}}},
            {"train", {{"steps", c.train_steps}, {"runs", c.train_runs}, {"hyperparams", c.trainer}}},
            {"heuristic",
             {{"budget", c.heuristic.budget},
              {"n_episodes", c.heuristic.n_episodes},
              {"step", c.heuristic.step},
              {"plateau_moves", c.heuristic.plateau_moves}}},
            {"eval",
             {{"threshold", c.eval.threshold},
              {"samples", c.eval.samples},
              {"measure_episodes", c.eval.measure_episodes}}},
            {"logs", {{"rows", c.log_rows}}}};
}

std::string sha256_hex(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 unavailable");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md.data(), &len);
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

nlohmann::json build_manifest(const fs::path& root) {
    std::vector<fs::path> files;
    if (fs::exists(root)) {
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (entry.is_regular_file() && entry.path() != root / "manifest.json") files.push_back(entry.path());
        }
    }
    std::vector<std::string> rel;
    for (const auto& f : files) rel.push_back(fs::relative(f, root).generic_string());
    std::sort(rel.begin(), rel.end());
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : rel) {
        list.push_back({{"path", r}, {"bytes", fs::file_size(root / r)}, {"sha256", sha256_hex(root / r)}});
    }
    return {{"files", list}};
}

void write_manifest(const fs::path& root) {
    fs::create_directories(root);
    const nlohmann::json m = build_manifest(root);
    std::ofstream out(root / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest in " + root.string());
    out << m.dump(2) << '\n';
}

}  // namespace chatpcg::cli
