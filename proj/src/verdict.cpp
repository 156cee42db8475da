#include "phishscope/verdict.hpp"

#include "phishscope/errors.hpp"

#include <cmath>

namespace phishscope {

using nlohmann::json;

std::size_t word_count(std::string_view text) {
    std::size_t words = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

const DetectionVerdict& validate_verdict(const DetectionVerdict& v, PromptVariant variant) {
    if (!is_simple(variant) && !v.phishing_score) throw MissingField("phishing_score");
    if (v.phishing_score && (*v.phishing_score < kMinScore || *v.phishing_score > kMaxScore)) {
        throw InvalidScore("phishing_score " + std::to_string(*v.phishing_score) + " outside 0..10");
    }
    if (v.rationales) {
        auto words = word_count(*v.rationales);
        if (words > kMaxRationaleWords) {
            throw RationalesTooLong("rationales has " + std::to_string(words) + " words, limit is 500");
        }
    }
    return v;
}

namespace {

std::string quote(const std::string& s) {
    return json(s).dump(-1, ' ', false, json::error_handler_t::replace);
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaViolation(key, "expected string, got " + std::string(it->type_name()));
    return it->get<std::string>();
}

} // namespace

std::string verdict_to_json(const DetectionVerdict& v) {
    std::string out = "{\"is_phishing\": ";
    out += v.is_phishing ? "true" : "false";
    if (v.phishing_score) out += ", \"phishing_score\": " + std::to_string(*v.phishing_score);
    if (!v.brand_impersonated.empty()) out += ", \"brand_impersonated\": " + quote(v.brand_impersonated);
    if (v.rationales) out += ", \"rationales\": " + quote(*v.rationales);
    if (v.brief_reason) out += ", \"brief_reason\": " + quote(*v.brief_reason);
    out += '}';
    return out;
}

DetectionVerdict verdict_from_json(const json& obj) {
    if (!obj.is_object()) throw SchemaViolation("(root)", "expected object, got " + std::string(obj.type_name()));
    DetectionVerdict v;

    auto flag = obj.find("is_phishing");
    if (flag == obj.end()) throw SchemaViolation("is_phishing", "missing");
    if (!flag->is_boolean()) throw SchemaViolation("is_phishing", "expected boolean, got " + std::string(flag->type_name()));
    v.is_phishing = flag->get<bool>();

    if (auto score = obj.find("phishing_score"); score != obj.end() && !score->is_null()) {
        if (score->is_number_integer()) {
            auto n = score->get<long long>();
            if (n < -1000000 || n > 1000000) throw SchemaViolation("phishing_score", "out of integer range");
            v.phishing_score = static_cast<int>(n);
        } else if (score->is_number_float()) {
            double d = score->get<double>();
            if (!std::isfinite(d) || d != std::floor(d) || std::fabs(d) > 1e6) {
                throw SchemaViolation("phishing_score", "expected an integer score");
            }
            v.phishing_score = static_cast<int>(d);
        } else {
            throw SchemaViolation("phishing_score", "expected number, got " + std::string(score->type_name()));
        }
    }

    v.brand_impersonated = optional_string(obj, "brand_impersonated").value_or("");
    v.rationales = optional_string(obj, "rationales");
    v.brief_reason = optional_string(obj, "brief_reason");
    return v;
}

DetectionVerdict verdict_from_json_text(std::string_view text) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded()) throw SchemaViolation("(root)", "not valid JSON");
    return verdict_from_json(parsed);
}

} // namespace phishscope
