#include "chatpcg/pipeline.hpp"

#include <unordered_map>

namespace chatpcg {

namespace {

const std::unordered_map<std::string, std::string>& templates() {
    static const std::unordered_map<std::string, std::string> table = {
#include "prompt_assets.inc"
    };
    return table;
}

}  // namespace

const std::string& prompt_template(const std::string& name) {
    const auto& table = templates();
    const auto it = table.find(name);
    if (it == table.end()) throw std::invalid_argument("unknown prompt template '" + name + "'");
    return it->second;
}

std::string render_template(const std::string& text, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto open = text.find("{{", i);
        if (open == std::string::npos) {
            out.append(text, i);
            break;
        }
        const auto close = text.find("}}", open + 2);
        if (close == std::string::npos) throw std::invalid_argument("unterminated placeholder in template");
        out.append(text, i, open - i);
        const std::string key = text.substr(open + 2, close - open - 2);
        const auto it = values.find(key);
        if (it == values.end()) throw std::invalid_argument("no value for template placeholder '" + key + "'");
        out += it->second;
        i = close + 2;
    }
    return out;
}

}  // namespace chatpcg
