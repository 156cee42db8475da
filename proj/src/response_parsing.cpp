#include "phishscope/response_parsing.hpp"

#include "phishscope/errors.hpp"

#include <cctype>
#include <regex>

namespace phishscope {

using nlohmann::json;

DetectionVerdict parse_structured(const RawModelResponse& response, const ResponseSchema&) {
    if (!response.is_structured()) throw SchemaViolation("(root)", "response holds free text, not arguments");
    return verdict_from_json(std::get<json>(response.content));
}

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// End of the balanced object starting at `open`, tracking double-quoted strings.
std::size_t matching_brace(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i;
    }
    return std::string_view::npos;
}

const json* find_verdict_object(const json& node) {
    if (node.is_object()) {
        if (node.contains("is_phishing")) return &node;
        for (const auto& [_, child] : node.items()) {
            if (const json* hit = find_verdict_object(child)) return hit;
        }
    } else if (node.is_array()) {
        for (const auto& child : node) {
            if (const json* hit = find_verdict_object(child)) return hit;
        }
    }
    return nullptr;
}

// Accept the common ways models get the types wrong.
json coerce(json obj) {
    auto& flag = obj["is_phishing"];
    if (flag.is_string()) {
        std::string v = to_lower(flag.get<std::string>());
        if (v == "true" || v == "yes") flag = true;
        else if (v == "false" || v == "no") flag = false;
    } else if (flag.is_number_integer() && (flag == 0 || flag == 1)) {
        flag = flag == 1;
    }
    if (auto it = obj.find("phishing_score"); it != obj.end() && it->is_string()) {
        const std::string s = it->get<std::string>();
        std::smatch m;
        static const std::regex num(R"(^\s*(\d{1,2})(?:\s*/\s*10)?\s*$)");
        if (std::regex_match(s, m, num)) *it = std::stoi(m[1]);
    }
    for (const char* key : {"brand_impersonated", "rationales", "brief_reason"}) {
        if (auto it = obj.find(key); it != obj.end() && !it->is_string() && !it->is_null()) *it = it->dump();
    }
    return obj;
}

std::optional<DetectionVerdict> verdict_from_candidate(std::string_view region) {
    json parsed = json::parse(region, nullptr, false);
    if (parsed.is_discarded()) parsed = json::parse(normalize_loose_json(region), nullptr, false);
    if (parsed.is_discarded()) return std::nullopt;
    const json* obj = find_verdict_object(parsed);
    if (obj == nullptr) return std::nullopt;
    try {
        return verdict_from_json(*obj);
    } catch (const SchemaViolation&) {
    }
    try {
        return verdict_from_json(coerce(*obj));
    } catch (const SchemaViolation&) {
        return std::nullopt;
    }
}

std::optional<DetectionVerdict> from_embedded_object(std::string_view text) {
    for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
        std::size_t end = matching_brace(text, pos);
        if (end == std::string_view::npos) continue;
        std::string_view region = text.substr(pos, end - pos + 1);
        if (region.find("is_phishing") == std::string_view::npos) {
            pos = end;  // nothing relevant inside this object
            continue;
        }
        if (auto v = verdict_from_candidate(region)) return v;
    }
    return std::nullopt;
}

struct Hit {
    std::size_t begin, end;
    bool phishing;
};

void collect(const std::regex& re, const std::string& text, bool phishing, std::vector<Hit>& out) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        auto b = static_cast<std::size_t>(it->position());
        out.push_back({b, b + static_cast<std::size_t>(it->length()), phishing});
    }
}

std::optional<int> find_score(const std::string& text) {
    static const std::regex keyed(R"re(phishing[_ ]score["']?\s*(?:[:=]|is|of)?\s*["']?(\d{1,2})\b)re",
                                  std::regex::icase);
    static const std::regex out_of(R"((\d{1,2})\s*(?:/|out of)\s*10\b)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(text, m, keyed) || std::regex_search(text, m, out_of)) return std::stoi(m[1]);
    return std::nullopt;
}

std::optional<DetectionVerdict> from_keywords(std::string_view view) {
    const std::string text(view);
    DetectionVerdict v;

    static const std::regex keyed(R"re(is_phishing["'`]?\s*(?:[:=]|is)\s*["'`]?(true|false|yes|no)\b)re",
                                  std::regex::icase);
    std::smatch m;
    if (std::regex_search(text, m, keyed)) {
        std::string value = to_lower(m[1].str());
        v.is_phishing = value == "true" || value == "yes";
        v.phishing_score = find_score(text);
        return v;
    }

    static const std::regex negative(
        R"(\b(?:not|isn't|is not|no)\s+(?:an?\s+|likely\s+|considered\s+|indicative of\s+)?phishing\b|)"
        R"(\bno (?:signs|indicators|evidence) of phishing\b|)"
        R"(\b(?:is|appears|seems|looks)\s+(?:to be\s+)?(?:a\s+|an\s+)?(?:entirely\s+|likely\s+|probably\s+)?)"
        R"((?:legitimate|legit|benign|safe|genuine)\b|)"
        R"(\b(?:legitimate|benign|genuine|safe)\s+(?:email|message)\b|)"
        R"(\bverdict\s*:\s*(?:legitimate|benign|safe|not phishing)\b)",
        std::regex::icase);
    static const std::regex positive(
        R"(\bphishing\s+(?:email|attempt|message|scam|campaign|attack)\b|)"
        R"(\b(?:is|appears|seems|looks)\s+(?:to be\s+|like\s+)?(?:an?\s+)?(?:clear\s+|likely\s+|probably\s+|definitely\s+)?phishing\b|)"
        R"(\bverdict\s*:\s*phishing\b|)"
        R"(\bclassified as\s+(?:an?\s+)?phishing\b)",
        std::regex::icase);

    std::vector<Hit> neg, pos;
    collect(negative, text, false, neg);
    collect(positive, text, true, pos);
    std::vector<Hit> hits = neg;
    for (const auto& p : pos) {
        bool overlapped = false;
        for (const auto& n : neg) overlapped |= p.begin < n.end && n.begin < p.end;
        if (!overlapped) hits.push_back(p);
    }
    if (hits.empty()) return std::nullopt;
    // the conclusion usually comes last
    const Hit* last = &hits.front();
    for (const auto& h : hits) {
        if (h.begin > last->begin) last = &h;
    }
    v.is_phishing = last->phishing;
    v.phishing_score = find_score(text);
    return v;
}

} // namespace

std::string normalize_loose_json(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 16);
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '"') {
            // copy a double-quoted string verbatim
            std::size_t j = i + 1;
            while (j < s.size() && s[j] != '"') j += s[j] == '\\' ? 2 : 1;
            out.append(s.substr(i, std::min(j, s.size() - 1) - i + 1));
            i = j;
            continue;
        }
        if (c == '\'') {
            out += '"';
            std::size_t j = i + 1;
            for (; j < s.size() && s[j] != '\''; ++j) {
                if (s[j] == '\\' && j + 1 < s.size()) {
                    if (s[j + 1] == '\'') {
                        out += '\'';
                    } else {
                        out += s[j];
                        out += s[j + 1];
                    }
                    ++j;
                } else if (s[j] == '"') {
                    out += "\\\"";
                } else {
                    out += s[j];
                }
            }
            out += '"';
            i = j;
            continue;
        }
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;  // trailing comma
            out += c;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && ident_char(s[j])) ++j;
            std::string_view word = s.substr(i, j - i);
            std::size_t k = j;
            while (k < s.size() && (s[k] == ' ' || s[k] == '\t')) ++k;
            if (k < s.size() && s[k] == ':') {
                out += '"';
                out.append(word);
                out += '"';
            } else if (word == "True") {
                out += "true";
            } else if (word == "False") {
                out += "false";
            } else if (word == "None") {
                out += "null";
            } else {
                out.append(word);
            }
            i = j - 1;
            continue;
        }
        out += c;
    }
    return out;
}

DetectionVerdict extract_json_fallback(std::string_view text) {
    if (auto v = from_embedded_object(text)) return *v;
    if (auto v = from_keywords(text)) return *v;
    throw Unparseable("no verdict found in model output");
}

DetectionVerdict interpret_response(const RawModelResponse& response, const ResponseSchema& schema,
                                    PromptVariant variant) {
    DetectionVerdict v = response.is_structured() ? parse_structured(response, schema)
                                                  : extract_json_fallback(std::get<std::string>(response.content));
    validate_verdict(v, variant);
    return v;
}

} // namespace phishscope
