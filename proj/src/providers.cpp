#include "phishscope/errors.hpp"
#include "phishscope/gateway.hpp"

#include "httplib.h"

#include <cstdlib>
#include <thread>

namespace phishscope {

using nlohmann::json;

namespace {

// Email text between the prompt's opening and closing fences.
std::string_view email_slot(std::string_view prompt) {
    auto open = prompt.find("Email:\n```");
    if (open == std::string_view::npos) return prompt;
    open += 10;
    auto close = prompt.rfind("```");
    if (close == std::string_view::npos || close < open) return prompt.substr(open);
    return prompt.substr(open, close - open);
}

std::string_view body_of(std::string_view email) {
    auto split = email.find("\n\n");
    return split == std::string_view::npos ? std::string_view{} : email.substr(split + 2);
}

} // namespace

MockProvider::MockProvider(ProviderProfile profile) : profile_(std::move(profile)) {}

std::vector<json> MockProvider::captured_requests() const {
    std::lock_guard lock(mutex_);
    return captured_;
}

RawModelResponse MockProvider::complete(const ProviderRequest& request) {
    const int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    ++calls_;
    {
        std::lock_guard lock(mutex_);
        captured_.push_back(build_openai_chat_body(request));
    }
    if (profile_.mock_delay.count() > 0) std::this_thread::sleep_for(profile_.mock_delay);

    const std::string body = to_lower(body_of(email_slot(request.prompt)));
    json args = {{"is_phishing", false},
                 {"phishing_score", 0},
                 {"brand_impersonated", ""},
                 {"rationales", "No rule keyword appears in the email body."},
                 {"brief_reason", "No suspicious keywords."}};
    for (const auto& rule : profile_.mock_rules) {
        if (body.find(to_lower(rule.keyword)) == std::string::npos) continue;
        args = {{"is_phishing", rule.is_phishing},
                {"phishing_score", rule.score},
                {"brand_impersonated", rule.brand},
                {"rationales", "The email body contains the keyword '" + rule.keyword + "'."},
                {"brief_reason", "Matched keyword '" + rule.keyword + "'."}};
        break;
    }

    RawModelResponse response;
    std::string output_text;
    if (request.schema) {
        json filtered = json::object();
        for (const auto& p : request.schema->properties) {
            if (args.contains(p.name)) filtered[p.name] = args[p.name];
        }
        output_text = filtered.dump();
        response.content = std::move(filtered);
    } else {
        // free-text provider: the JSON is wrapped in prose and a code fence
        if (request.prompt.find("- phishing_score:") == std::string::npos) args = {{"is_phishing", args["is_phishing"]}};
        output_text = "Here is my analysis of the email.\n```json\n" + args.dump(2) + "\n```\n";
        response.content = output_text;
    }
    response.input_tokens = approx4_count(request.prompt);
    response.output_tokens = approx4_count(output_text);
    --in_flight_;
    return response;
}

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;    // path + query
};

Url split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint is not an absolute URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::size_t json_size(const json& obj, const char* key) {
    auto it = obj.find(key);
    return (it != obj.end() && it->is_number_unsigned()) ? it->get<std::size_t>()
           : (it != obj.end() && it->is_number_integer() && it->get<long long>() > 0)
               ? static_cast<std::size_t>(it->get<long long>())
               : 0;
}

RawModelResponse parse_openai_response(const json& body) {
    RawModelResponse out;
    const auto& message = body.at("choices").at(0).at("message");
    json arguments;
    if (message.contains("tool_calls") && message["tool_calls"].is_array() && !message["tool_calls"].empty()) {
        arguments = message["tool_calls"][0].at("function").at("arguments");
    } else if (message.contains("function_call") && message["function_call"].is_object()) {
        arguments = message["function_call"].at("arguments");
    }
    if (arguments.is_string()) {
        // arguments arrive as a JSON-encoded string; keep the text if it does not parse
        json parsed = json::parse(arguments.get<std::string>(), nullptr, false);
        if (parsed.is_object()) {
            out.content = std::move(parsed);
        } else {
            out.content = arguments.get<std::string>();
        }
    } else if (arguments.is_object()) {
        out.content = arguments;
    } else {
        out.content = message.value("content", std::string{});
    }
    if (body.contains("usage")) {
        out.input_tokens = json_size(body["usage"], "prompt_tokens");
        out.output_tokens = json_size(body["usage"], "completion_tokens");
    }
    return out;
}

RawModelResponse parse_gemini_response(const json& body) {
    RawModelResponse out;
    const auto& parts = body.at("candidates").at(0).at("content").at("parts");
    std::string text;
    bool structured = false;
    for (const auto& part : parts) {
        if (part.contains("functionCall")) {
            out.content = part["functionCall"].value("args", json::object());
            structured = true;
            break;
        }
        if (part.contains("text")) text += part["text"].get<std::string>();
    }
    if (!structured) out.content = text;
    if (body.contains("usageMetadata")) {
        out.input_tokens = json_size(body["usageMetadata"], "promptTokenCount");
        out.output_tokens = json_size(body["usageMetadata"], "candidatesTokenCount");
    }
    return out;
}

} // namespace

HttpProvider::HttpProvider(ProviderProfile profile) : profile_(std::move(profile)) {
    if (!profile_.credential_env.empty()) {
        const char* value = std::getenv(profile_.credential_env.c_str());
        if (value == nullptr || *value == '\0') {
            throw AuthError("credential environment variable " + profile_.credential_env + " is not set");
        }
        credential_ = value;
    }
}

RawModelResponse HttpProvider::complete(const ProviderRequest& request) {
    Url url = split_url(profile_.endpoint);
    httplib::Headers headers;
    json body;
    switch (profile_.api_style) {
    case ApiStyle::openai:
        body = build_openai_chat_body(request);
        if (!credential_.empty()) headers.emplace("Authorization", "Bearer " + credential_);
        break;
    case ApiStyle::azure_openai:
        body = build_openai_chat_body(request);
        body.erase("model");  // the deployment in the URL selects the model
        if (!credential_.empty()) headers.emplace("api-key", credential_);
        break;
    case ApiStyle::gemini:
        body = build_gemini_body(request);
        if (!credential_.empty()) headers.emplace("x-goog-api-key", credential_);
        break;
    case ApiStyle::mock:
        throw ConfigError("mock profiles have no HTTP adapter");
    }

    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(profile_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(profile_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto result = client.Post(url.path, headers, body.dump(), "application/json");
    if (!result) throw TransportError("request to " + url.origin + " failed: " + httplib::to_string(result.error()));

    const int status = result->status;
    if (status == 401 || status == 403) throw AuthError("provider rejected credentials (HTTP " + std::to_string(status) + ")");
    if (status == 408 || status == 429 || status >= 500) {
        throw TransportError("provider returned HTTP " + std::to_string(status));
    }
    if (status < 200 || status >= 300) {
        throw ProviderRefusal(status, "provider refused the request (HTTP " + std::to_string(status) + "): " +
                                          result->body.substr(0, 200));
    }

    json parsed = json::parse(result->body, nullptr, false);
    if (parsed.is_discarded()) throw ProviderRefusal(status, "provider returned a non-JSON body");
    try {
        return profile_.api_style == ApiStyle::gemini ? parse_gemini_response(parsed) : parse_openai_response(parsed);
    } catch (const json::exception& e) {
        throw ProviderRefusal(status, std::string("unexpected response shape: ") + e.what());
    }
}

std::shared_ptr<Provider> make_provider(const ProviderProfile& profile) {
    if (profile.api_style == ApiStyle::mock) return std::make_shared<MockProvider>(profile);
    return std::make_shared<HttpProvider>(profile);
}

} // namespace phishscope
