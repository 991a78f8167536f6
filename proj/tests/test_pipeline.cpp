#include "doctest.h"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "chatpcg/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#ifndef CHATPCG_SOURCE_DIR
#define CHATPCG_SOURCE_DIR "."
#endif

using namespace chatpcg;

namespace {

const char* kValidProgram =
    "# alive\n"
    "module alive weight 0.5:\n"
    "  mean(survive_time_p1, survive_time_p2, survive_time_p3, survive_time_p4) / max_episode_time\n"
    "# dealt\n"
    "module dealt weight 0.25:\n"
    "  clamp(damage_dealt_p1 / boss_max_health, 0, 1)\n"
    "# taken\n"
    "module taken weight 0.25:\n"
    "  clamp(damage_taken_p1 / 1000, 0, 1)\n";

PipelineConfig test_config() {
    PipelineConfig c = PipelineConfig::defaults(GameConfig::defaults());
    c.rng_seed = 17;
    return c;
}

const std::vector<PlaytestRow>& dataset() {
    static const std::vector<PlaytestRow> rows = [] {
        const Simulator sim(GameConfig::defaults());
        return collect_log_dataset(sim, 200, {5, false});
    }();
    return rows;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("chatpcg_test_pipeline_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

nlohmann::json without_timestamps(nlohmann::json j) {
    for (auto& c : j["backend_call_log"]) c.erase("timestamp");
    return j;
}

}  // namespace

TEST_CASE("templates render and reject missing placeholders") {
    CHECK(render_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
    CHECK_THROWS_AS(render_template("{{missing}}", {}), std::invalid_argument);
    CHECK_THROWS_AS(render_template("{{open", {}), std::invalid_argument);
    for (const char* name : {"system", "insights", "program", "feedback", "revise", "repair", "grammar",
                             "env_description", "design_principle"}) {
        CHECK_FALSE(prompt_template(name).empty());
    }
    CHECK_THROWS_AS(prompt_template("nope"), std::invalid_argument);
}

TEST_CASE("insight prompt contents") {
    const PipelineConfig c = test_config();
    const std::string prompt = build_insight_prompt(c);
    for (const auto& name : playtest_variable_names()) CHECK(prompt.find(name) != std::string::npos);
    CHECK(prompt.find("Role differentiation") != std::string::npos);
    CHECK(prompt.find("boss raid") != std::string::npos);
    const auto constraints = prompt.substr(prompt.find("## Constraints"));
    CHECK(constraints.find("[-1, 1]") != std::string::npos);
    CHECK(prompt == build_insight_prompt(test_config()));

    PipelineConfig other = c;
    other.constraints.lo = -3;
    other.constraints.hi = 2.5;
    CHECK(build_insight_prompt(other).find("[-3, 2.5]") != std::string::npos);
}

TEST_CASE("numbered-list and program extraction") {
    const auto items = extract_numbered_list("Sure:\n1. first\n2) second\n   continued\n\n3. third\nThanks!");
    REQUIRE(items.size() == 3);
    CHECK(items[1] == "second continued");
    CHECK(extract_numbered_list("").empty());
    CHECK(extract_numbered_list("no list here\n- bullet").empty());
    CHECK(extract_program_text("text\n```rwd\nmodule a weight 1: 1\n```\nmore") == "module a weight 1: 1\n");
    CHECK(extract_program_text("module a weight 1: 1") == "module a weight 1: 1");
}

TEST_CASE("generate_insights parses numbered responses") {
    const PipelineConfig c = test_config();
    ScriptedBackend three(std::vector<std::string>{"1. a\n2. b\n3. c\n"});
    CHECK(generate_insights(three, c).items.size() == 3);
    CHECK(three.call_count() == 1);

    ScriptedBackend late(std::vector<std::string>{"I think...", "1. only one"});
    CHECK(generate_insights(late, c).items == std::vector<std::string>{"only one"});
    CHECK(late.call_count() == 2);

    ScriptedBackend empty(std::vector<std::string>{"", ""});
    CHECK_THROWS_AS(generate_insights(empty, c), PipelineError);
    CHECK(empty.call_count() == 2);

    PipelineConfig capped = c;
    capped.max_insights = 2;
    capped.insight_max_chars = 10;
    ScriptedBackend many(std::vector<std::string>{"1. one two three four five\n2. b\n3. c\n"});
    const auto set = generate_insights(many, capped);
    REQUIRE(set.items.size() == 2);
    CHECK(set.items[0].size() <= 10);
}

TEST_CASE("generate_initial_program retry contract") {
    const PipelineConfig c = test_config();
    const InsightSet insights{{"a", "b", "c"}};

    ScriptedBackend ok(std::vector<std::string>{kValidProgram});
    const auto p = generate_initial_program(ok, insights, c);
    CHECK(p.modules.size() == 3);
    CHECK(p.modules[0].insight_text == "alive");

    std::vector<std::string> seen;
    ScriptedBackend fixed([&](const Conversation& conv, int call) -> std::string {
        seen.push_back(conv.messages.back().content);
        return call == 0 ? "module a weight 1: heal_done_p1" : kValidProgram;
    });
    CHECK(generate_initial_program(fixed, insights, c).modules.size() == 3);
    CHECK(fixed.call_count() == 2);
    CHECK(seen[1].find("heal_done_p1") != std::string::npos);

    ScriptedBackend bad([](const Conversation&, int) -> std::string { return "module a weight: 1"; });
    try {
        generate_initial_program(bad, insights, c);
        FAIL("expected SynthesisError");
    } catch (const SynthesisError& e) {
        CHECK(e.attempts() == 4);
        CHECK(e.diagnostics().find("1:16") != std::string::npos);
    }
    CHECK(bad.call_count() == 4);
    CHECK_THROWS_AS(generate_initial_program(ok, InsightSet{}, c), PipelineError);
}

TEST_CASE("sample_alignment_rows") {
    const Simulator sim(GameConfig::defaults());
    const auto big = collect_log_dataset(sim, 1500, {1, false});
    const auto rows = sample_alignment_rows(big, 20, 9);
    CHECK(rows.size() == 20);
    std::set<std::uint64_t> seeds;
    for (const auto& r : rows) seeds.insert(r.seed);
    CHECK(seeds.size() == 20);
    CHECK(sample_alignment_rows(big, 20, 9) == rows);
    CHECK(sample_alignment_rows(big, 20, 10) != rows);

    const auto& small = dataset();
    const auto all = sample_alignment_rows(small, static_cast<int>(small.size()), 3);
    std::multiset<std::uint64_t> a;
    std::multiset<std::uint64_t> b;
    for (const auto& r : all) a.insert(r.seed);
    for (const auto& r : small) b.insert(r.seed);
    CHECK(a == b);
    CHECK(all != small);
    CHECK_THROWS_AS(sample_alignment_rows(small, static_cast<int>(small.size()) + 1, 3), PipelineError);
}

TEST_CASE("generate_feedback returns the response and shows the statistics") {
    const PipelineConfig c = test_config();
    const auto program = dsl::parse_program("module big weight 1: 5\nmodule other weight 1: 1");
    const auto rows = sample_alignment_rows(dataset(), 20, 1);
    const auto report = dsl::evaluate_batch(program, rows, c.constraints);
    REQUIRE(report.range_violations == 20);

    std::string prompt;
    ScriptedBackend b([&](const Conversation& conv, int) -> std::string {
        prompt = conv.messages.back().content;
        return "Scale the big module down.";
    });
    CHECK(generate_feedback(b, program, report, c) == "Scale the big module down.");
    CHECK(prompt.find("module big") != std::string::npos);
    CHECK(prompt.find("module other") != std::string::npos);
    CHECK(prompt.find("outside [-1, 1]: 20") != std::string::npos);
    CHECK(prompt.find("evaluation errors: 0") != std::string::npos);
    CHECK(prompt.find("mean 6") != std::string::npos);

    ScriptedBackend blank(std::vector<std::string>{"  \n", "fix it"});
    CHECK(generate_feedback(blank, program, report, c) == "fix it");
    CHECK(blank.call_count() == 2);
}

TEST_CASE("revise_program applies the revision and retries") {
    const PipelineConfig c = test_config();
    const auto program = dsl::parse_program(kValidProgram);
    std::string changed = kValidProgram;
    changed.replace(changed.find("weight 0.25"), 11, "weight 0.75");

    ScriptedBackend b(std::vector<std::string>{"not a program", changed});
    const auto revised = revise_program(b, program, "raise dealt", c);
    CHECK(b.call_count() == 2);
    CHECK(revised.module_names() == program.module_names());
    CHECK(revised.modules[1].weight == 0.75);
    CHECK(dsl::same_structure(*revised.modules[1].body, *program.modules[1].body));
    CHECK(revised.modules[0].weight == program.modules[0].weight);
    CHECK(revised.modules[2].weight == program.modules[2].weight);
}

TEST_CASE("run_pipeline cot with the canned designer") {
    const PipelineConfig c = test_config();
    const auto dir = temp_dir("cot");
    const PipelineOutputs out{dir / "transcript.json", dir / "final.rwd"};
    ScriptedBackend b(canned_designer());
    const auto t = run_pipeline(b, c, dataset(), out);
    CHECK(t.status == "ok");
    CHECK(t.iterations.size() == 5);
    CHECK(t.insights.size() == 3);
    CHECK(b.call_count() == 2 + 2 * 5);
    CHECK(t.backend_call_log.size() == 12);
    CHECK(t.backend_call_log[0].role == "insights");
    CHECK(t.backend_call_log[1].role == "program");
    CHECK(t.backend_call_log[2].role == "feedback");
    CHECK(t.backend_call_log[3].role == "revise");
    CHECK(t.alignment_row_seeds.size() == 20);
    for (const auto& it : t.iterations) {
        CHECK_FALSE(it.feedback.empty());
        CHECK(it.eval_report.n_rows == 20);
        CHECK(dsl::validate(dsl::parse_program(it.program_source), c.constraints).empty());
    }
    CHECK(dsl::validate(t.final_program, c.constraints).empty());
    // 0.05 moves from the first to the last module per revision.
    CHECK(t.final_program.modules.front().weight == doctest::Approx(0.15));
    CHECK(t.final_program.modules.back().weight == doctest::Approx(0.55));

    std::ifstream in(out.transcript_path);
    const auto j = nlohmann::json::parse(in);
    CHECK(j["iterations"].size() == 5);
    CHECK(j["status"] == "ok");
    CHECK(transcript_from_json(j).iterations.size() == 5);
    std::ifstream rwd(out.program_path);
    std::stringstream ss;
    ss << rwd.rdbuf();
    CHECK(ss.str() == dsl::print_program(t.final_program));

    ScriptedBackend again(canned_designer());
    CHECK(without_timestamps(to_json(run_pipeline(again, c, dataset()))) == without_timestamps(to_json(t)));
}

TEST_CASE("run_pipeline io mode has no iterations") {
    PipelineConfig c = test_config();
    c.mode = PipelineMode::Io;
    ScriptedBackend b(canned_designer());
    const auto t = run_pipeline(b, c, dataset());
    CHECK(t.iterations.empty());
    CHECK(t.n_align == 0);
    CHECK(b.call_count() == 2);
    CHECK(t.final_program.modules.size() == 3);
}

TEST_CASE("run_pipeline flushes a partial transcript on failure") {
    const PipelineConfig c = test_config();
    const auto dir = temp_dir("partial");
    auto canned = canned_designer();
    int feedback_calls = 0;
    ScriptedBackend b([&](const Conversation& conv, int call) -> std::string {
        if (conv.stage == "feedback" && ++feedback_calls == 3) throw BackendError("connection reset");
        return canned(conv, call);
    });
    CHECK_THROWS_AS(run_pipeline(b, c, dataset(), {dir / "t.json", dir / "final.rwd"}), BackendError);
    std::ifstream in(dir / "t.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j["status"] == "error");
    CHECK(j["error"].get<std::string>().find("connection reset") != std::string::npos);
    CHECK(j["iterations"].size() == 2);
    CHECK(j["backend_call_log"].size() == 7);
    CHECK_FALSE(std::filesystem::exists(dir / "final.rwd"));

    PipelineConfig no_rows = c;
    no_rows.m_rows = 500;
    ScriptedBackend b2(canned_designer());
    CHECK_THROWS_AS(run_pipeline(b2, no_rows, dataset()), PipelineError);
}

TEST_CASE("recorded sessions replay identically") {
    const PipelineConfig c = test_config();
    const auto dir = temp_dir("record");
    ScriptedBackend live(canned_designer());
    RecordingBackend recorder(live, dir / "session.json");
    const auto t = run_pipeline(recorder, c, dataset());
    CHECK(read_replay_file(dir / "session.json").size() == 12);

    for (int run = 0; run < 2; ++run) {
        ReplayBackend replay = ReplayBackend::from_file(dir / "session.json");
        const auto r = run_pipeline(replay, c, dataset());
        CHECK(dsl::print_program(r.final_program) == dsl::print_program(t.final_program));
        CHECK(r.insights == t.insights);
        for (std::size_t i = 0; i < r.iterations.size(); ++i) CHECK(r.iterations[i].feedback == t.iterations[i].feedback);
        CHECK(replay.remaining() == 0);
    }
    ReplayBackend short_replay(std::vector<std::string>{"1. x"});
    CHECK_THROWS_AS(run_pipeline(short_replay, c, dataset()), BackendError);
}

TEST_CASE("hand-written replay fixture drives a full cot session") {
    const PipelineConfig c = test_config();
    ReplayBackend replay = ReplayBackend::from_file(CHATPCG_SOURCE_DIR "/tests/fixtures/replay_cot_session.json");
    const auto t = run_pipeline(replay, c, dataset());
    CHECK(t.iterations.size() == 5);
    CHECK(t.insights.size() == 4);
    CHECK(t.final_program.module_names() == std::vector<std::string>{"tank", "dealers", "spread", "tempo"});
    CHECK(replay.call_count() == 12);
    CHECK(replay.remaining() == 0);
}

TEST_CASE("http backend speaks the chat-completion wire format") {
    httplib::Server server;
    int requests = 0;
    nlohmann::json last_body;
    std::string last_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++requests;
        last_auth = req.get_header_value("Authorization");
        last_body = nlohmann::json::parse(req.body);
        if (last_body["messages"].back()["content"] == "flaky" && requests == 1) {
            res.status = 503;
            return;
        }
        if (last_body["messages"].back()["content"] == "reject") {
            res.status = 400;
            res.set_content("bad request", "text/plain");
            return;
        }
        const nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "hello"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("CHATPCG_TEST_KEY", "secret", 1);
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
    cfg.model = "test-model";
    cfg.temperature = 0.25;
    cfg.timeout_seconds = 5;
    cfg.retry_backoff_seconds = 0.0;
    cfg.api_key_env = "CHATPCG_TEST_KEY";
    HttpBackend backend(cfg);

    const Conversation flaky{"insights", {{"system", "sys"}, {"user", "flaky"}}};
    CHECK(backend.complete(flaky) == "hello");
    CHECK(requests == 2);
    CHECK(last_auth == "Bearer secret");
    CHECK(last_body["model"] == "test-model");
    CHECK(last_body["temperature"] == 0.25);
    CHECK(last_body["messages"].size() == 2);
    CHECK(last_body["messages"][0]["role"] == "system");

    const Conversation reject{"program", {{"user", "reject"}}};
    CHECK_THROWS_AS(backend.complete(reject), BackendError);
    CHECK(requests == 3);
    CHECK(backend.call_count() == 2);

    server.stop();
    thread.join();

    HttpBackendConfig dead = cfg;
    dead.base_url = "http://127.0.0.1:" + std::to_string(port);
    dead.max_attempts = 2;
    dead.timeout_seconds = 1;
    HttpBackend unreachable(dead);
    CHECK_THROWS_AS(unreachable.complete(flaky), BackendError);
    CHECK_THROWS_AS(HttpBackend(HttpBackendConfig{"no-scheme"}), BackendError);
}
