#include "chatpcg/pipeline.hpp"

#include <cmath>

namespace chatpcg {

namespace {

constexpr const char* kInsights =
    "1. Keep every player alive for most of the fight so the raid feels survivable.\n"
    "2. Every player should contribute a meaningful share of the damage dealt to the boss.\n"
    "3. One player should act as the tank and absorb most of the boss's damage.\n";

constexpr const char* kProgram =
    "# Keep every player alive for most of the fight so the raid feels survivable.\n"
    "module survival weight 0.4:\n"
    "  mean(survive_time_p1, survive_time_p2, survive_time_p3, survive_time_p4) / max_episode_time\n"
    "\n"
    "# Every player should contribute a meaningful share of the damage dealt to the boss.\n"
    "module damage_share weight 0.3:\n"
    "  clamp(min(damage_dealt_p1, damage_dealt_p2, damage_dealt_p3, damage_dealt_p4) /\n"
    "        (mean(damage_dealt_p1, damage_dealt_p2, damage_dealt_p3, damage_dealt_p4) + 1), 0, 1)\n"
    "\n"
    "# One player should act as the tank and absorb most of the boss's damage.\n"
    "module tank_split weight 0.3:\n"
    "  clamp((max(damage_taken_p1, damage_taken_p2, damage_taken_p3, damage_taken_p4) -\n"
    "         mean(damage_taken_p1, damage_taken_p2, damage_taken_p3, damage_taken_p4)) /\n"
    "        (max(damage_taken_p1, damage_taken_p2, damage_taken_p3, damage_taken_p4) + 1), 0, 1)\n";

std::string section(const std::string& prompt, const std::string& heading) {
    const auto start = prompt.find(heading);
    if (start == std::string::npos) return {};
    const auto body = start + heading.size();
    const auto end = prompt.find("\n## ", body);
    return prompt.substr(body, end == std::string::npos ? std::string::npos : end - body);
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

// Moves 0.05 of weight from the first module to the last one.
std::string revise(const std::string& prompt) {
    dsl::RewardProgram program = dsl::parse_program(section(prompt, "## Current reward program\n"));
    if (program.modules.size() >= 2) {
        auto& first = program.modules.front();
        auto& last = program.modules.back();
        if (first.weight > 0.1) {
            first.weight = round2(first.weight - 0.05);
            last.weight = round2(last.weight + 0.05);
        }
    }
    return "```\n" + dsl::print_program(program) + "```\n";
}

}  // namespace

ScriptedBackend::Responder canned_designer() {
    return [](const Conversation& conversation, int) -> std::string {
        if (conversation.stage == "insights") return kInsights;
        if (conversation.stage == "program") return kProgram;
        if (conversation.stage == "feedback") {
            return "The survival module carries too much weight compared with the tank module; shift weight toward "
                   "tank_split so that teams with a clear tank are rewarded more strongly.";
        }
        if (conversation.stage == "revise") return revise(conversation.messages.at(1).content);
        throw BackendError("canned designer: unknown stage '" + conversation.stage + "'");
    };
}

}  // namespace chatpcg
