#include "phishscope/gateway.hpp"

#include "phishscope/errors.hpp"

#include <thread>

namespace phishscope {

using nlohmann::json;

const SchemaProperty* ResponseSchema::property(std::string_view name) const {
    for (const auto& p : properties) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

json ResponseSchema::to_function_json() const {
    json props = json::object();
    json required = json::array();
    for (const auto& p : properties) {
        props[p.name] = {{"type", p.type}, {"description", p.description}};
        required.push_back(p.name);
    }
    return {
        {"name", function_name},
        {"description", description},
        {"parameters", {{"type", "object"}, {"properties", props}, {"required", required}}},
    };
}

ResponseSchema build_function_schema(PromptVariant variant) {
    ResponseSchema schema;
    schema.properties.push_back(
        {"is_phishing", "boolean",
         "A boolean value indicating whether the email is phishing (true) or legitimate (false)."});
    if (is_simple(variant)) return schema;
    schema.properties.push_back(
        {"phishing_score", "number", "Phishing risk confidence score as an integer on a scale from 0 to 10."});
    schema.properties.push_back(
        {"brand_impersonated", "string", "Brand name associated with the email, if applicable."});
    schema.properties.push_back(
        {"rationales", "string", "Detailed rationales for the determination, up to 500 words."});
    schema.properties.push_back({"brief_reason", "string", "Brief reason for the determination."});
    return schema;
}

std::string_view to_string(ApiStyle style) {
    switch (style) {
    case ApiStyle::mock: return "mock";
    case ApiStyle::openai: return "openai";
    case ApiStyle::azure_openai: return "azure_openai";
    case ApiStyle::gemini: return "gemini";
    }
    return "mock";
}

std::vector<MockRule> default_mock_rules() {
    return {
        {"verify", true, 8, ""},
        {"urgent", true, 8, ""},
        {"suspended", true, 8, ""},
        {"click", true, 8, ""},
    };
}

void ProviderProfile::validate() const {
    if (name.empty()) throw ConfigError("profile name is empty");
    if (price_per_1k_input < 0 || price_per_1k_output < 0) throw ConfigError("profile '" + name + "': negative price");
    if (max_in_flight < 1) throw ConfigError("profile '" + name + "': max_in_flight must be >= 1");
    if (max_attempts < 1) throw ConfigError("profile '" + name + "': max_attempts must be >= 1");
    if (api_style != ApiStyle::mock && endpoint.empty()) throw ConfigError("profile '" + name + "': endpoint required");
    for (const auto& r : mock_rules) {
        if (r.keyword.empty()) throw ConfigError("profile '" + name + "': empty mock keyword");
    }
}

ProviderProfile builtin_mock_profile() { return ProviderProfile{}; }

namespace {

ApiStyle parse_api_style(const std::string& s) {
    for (auto style : {ApiStyle::mock, ApiStyle::openai, ApiStyle::azure_openai, ApiStyle::gemini}) {
        if (to_string(style) == s) return style;
    }
    throw ConfigError("unknown api_style: " + s);
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& profile) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("profile '" + profile + "': bad value for '" + key + "': " + e.what());
    }
}

} // namespace

ProviderProfile profile_from_json(const json& obj) {
    if (!obj.is_object()) throw ConfigError("profile entry must be an object");
    ProviderProfile p;
    p.name = obj.contains("name") ? get_as<std::string>(obj, "name", "?") : "";
    for (const auto& [key, value] : obj.items()) {
        if (key == "name") continue;
        if (key == "api_style") {
            p.api_style = parse_api_style(get_as<std::string>(obj, key, p.name));
        } else if (key == "endpoint") {
            p.endpoint = get_as<std::string>(obj, key, p.name);
        } else if (key == "model_id") {
            p.model_id = get_as<std::string>(obj, key, p.name);
        } else if (key == "supports_structured_output") {
            p.supports_structured_output = get_as<bool>(obj, key, p.name);
        } else if (key == "tokenizer") {
            p.tokenizer.name = get_as<std::string>(obj, key, p.name);
        } else if (key == "price_per_1k_input") {
            p.price_per_1k_input = get_as<double>(obj, key, p.name);
        } else if (key == "price_per_1k_output") {
            p.price_per_1k_output = get_as<double>(obj, key, p.name);
        } else if (key == "max_in_flight") {
            p.max_in_flight = get_as<int>(obj, key, p.name);
        } else if (key == "timeout_ms") {
            p.timeout = std::chrono::milliseconds(get_as<long long>(obj, key, p.name));
        } else if (key == "credential_env") {
            p.credential_env = get_as<std::string>(obj, key, p.name);
        } else if (key == "max_attempts") {
            p.max_attempts = get_as<int>(obj, key, p.name);
        } else if (key == "initial_backoff_ms") {
            p.initial_backoff = std::chrono::milliseconds(get_as<long long>(obj, key, p.name));
        } else if (key == "mock_delay_ms") {
            p.mock_delay = std::chrono::milliseconds(get_as<long long>(obj, key, p.name));
        } else if (key == "mock_rules") {
            p.mock_rules.clear();
            for (const auto& r : value) {
                MockRule rule;
                rule.keyword = r.at("keyword").get<std::string>();
                rule.is_phishing = r.value("is_phishing", true);
                rule.score = r.value("phishing_score", 8);
                rule.brand = r.value("brand", std::string{});
                p.mock_rules.push_back(std::move(rule));
            }
        } else {
            throw ConfigError("profile '" + p.name + "': unknown key '" + key + "'");
        }
    }
    p.validate();
    return p;
}

std::vector<ProviderProfile> profiles_from_json(const json& config) {
    std::vector<ProviderProfile> out;
    bool has_mock = false;
    if (config.contains("profiles")) {
        const auto& list = config.at("profiles");
        if (!list.is_array()) throw ConfigError("'profiles' must be an array");
        for (const auto& entry : list) {
            out.push_back(profile_from_json(entry));
            has_mock |= out.back().name == "mock";
        }
    }
    if (!has_mock) out.insert(out.begin(), builtin_mock_profile());
    return out;
}

json build_openai_chat_body(const ProviderRequest& request) {
    json body = {
        {"model", request.model_id},
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
    };
    if (request.schema) {
        body["tools"] = json::array({{{"type", "function"}, {"function", request.schema->to_function_json()}}});
        body["tool_choice"] = {{"type", "function"}, {"function", {{"name", request.schema->function_name}}}};
    }
    return body;
}

json build_gemini_body(const ProviderRequest& request) {
    json body = {
        {"contents", json::array({{{"role", "user"}, {"parts", json::array({{{"text", request.prompt}}})}}})},
    };
    if (request.schema) {
        body["tools"] = json::array({{{"functionDeclarations", json::array({request.schema->to_function_json()})}}});
        body["toolConfig"] = {{"functionCallingConfig",
                               {{"mode", "ANY"}, {"allowedFunctionNames", json::array({request.schema->function_name})}}}};
    }
    return body;
}

// RAII in-flight slot.
class Gateway::Slot {
public:
    explicit Slot(Gateway& g) : g_(g) {
        std::unique_lock lock(g_.mutex_);
        g_.cv_.wait(lock, [&] { return g_.in_flight_ < g_.profile_.max_in_flight; });
        ++g_.in_flight_;
    }
    ~Slot() {
        {
            std::lock_guard lock(g_.mutex_);
            --g_.in_flight_;
        }
        g_.cv_.notify_one();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

private:
    Gateway& g_;
};

Gateway::Gateway(ProviderProfile profile, std::shared_ptr<Provider> provider)
    : profile_(std::move(profile)), provider_(std::move(provider)) {
    profile_.validate();
}

Gateway::Gateway(ProviderProfile profile) : Gateway(profile, make_provider(profile)) {}

RawModelResponse Gateway::submit(const RenderedPrompt& prompt, const ResponseSchema& schema) {
    ProviderRequest request;
    request.model_id = profile_.model_id;
    request.prompt = prompt.text;
    if (profile_.supports_structured_output) request.schema = schema;

    using clock = std::chrono::steady_clock;
    const auto started = clock::now();
    auto backoff = profile_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        const auto attempt_start = clock::now();
        try {
            RawModelResponse response = [&] {
                Slot slot(*this);
                return provider_->complete(request);
            }();
            const auto done = clock::now();
            response.latency = done - attempt_start;
            response.total_latency = done - started;
            response.attempts = attempt;
            return response;
        } catch (const TransportError& e) {
            if (attempt >= profile_.max_attempts) {
                throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) + " attempts)");
            }
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

} // namespace phishscope
