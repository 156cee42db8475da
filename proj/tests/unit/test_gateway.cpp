#include "phishscope/errors.hpp"
#include "phishscope/gateway.hpp"
#include "phishscope/response_parsing.hpp"

#include "doctest.h"
#include "generators.hpp"
#include "httplib.h"

#include <cstdlib>
#include <deque>
#include <thread>

using namespace phishscope;
using nlohmann::json;

namespace {

RenderedPrompt prompt_for(const std::string& body, PromptVariant variant = PromptVariant::normal) {
    SimplifiedEmail e;
    e.header_block = "From: a@b.example\n";
    e.body_text = body;
    return render_prompt(e, variant);
}

// Local HTTP endpoint replaying scripted replies in order; the last one repeats.
class ScriptedServer {
public:
    struct Reply {
        int status;
        std::string body;
    };

    explicit ScriptedServer(std::deque<Reply> replies) : replies_(std::move(replies)) {
        server_.Post(R"(.*)", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mutex_);
            requests_.push_back(req);
            Reply r = replies_.front();
            if (replies_.size() > 1) replies_.pop_front();
            res.status = r.status;
            res.set_content(r.body, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~ScriptedServer() {
        server_.stop();
        thread_.join();
    }

    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }
    std::vector<httplib::Request> requests() {
        std::lock_guard lock(mutex_);
        return requests_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mutex_;
    std::deque<Reply> replies_;
    std::vector<httplib::Request> requests_;
};

ProviderProfile http_profile(ApiStyle style, const std::string& endpoint) {
    ProviderProfile p;
    p.name = "local";
    p.api_style = style;
    p.endpoint = endpoint;
    p.model_id = "test-model";
    p.initial_backoff = std::chrono::milliseconds(0);
    p.timeout = std::chrono::milliseconds(2000);
    return p;
}

std::string openai_tool_reply(const json& args) {
    return json{{"choices",
                 json::array({{{"message",
                                {{"role", "assistant"},
                                 {"tool_calls", json::array({{{"type", "function"},
                                                              {"function", {{"name", "print_phishing_result"},
                                                                            {"arguments", args.dump()}}}}})}}}}})},
                {"usage", {{"prompt_tokens", 1200}, {"completion_tokens", 150}}}}
        .dump();
}

} // namespace

TEST_CASE("function schema") {
    const ResponseSchema normal = build_function_schema(PromptVariant::normal);
    CHECK(normal.function_name == "print_phishing_result");
    REQUIRE(normal.properties.size() == 5);
    const std::vector<std::string> names = {"is_phishing", "phishing_score", "brand_impersonated", "rationales",
                                            "brief_reason"};
    const std::vector<std::string> types = {"boolean", "number", "string", "string", "string"};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(normal.properties[i].name == names[i]);
        CHECK(normal.properties[i].type == types[i]);
    }
    CHECK(normal.property("phishing_score")->description.find("scale from 0 to 10") != std::string::npos);
    CHECK(normal.property("rationales")->description.find("500 words") != std::string::npos);

    for (auto v : {PromptVariant::simple, PromptVariant::embedded_schema_simple}) {
        const ResponseSchema simple = build_function_schema(v);
        REQUIRE(simple.properties.size() == 1);
        CHECK(simple.properties[0].name == "is_phishing");
    }
    CHECK(build_function_schema(PromptVariant::embedded_schema).properties.size() == 5);

    const json fn = normal.to_function_json();
    CHECK(fn["name"] == "print_phishing_result");
    CHECK(fn["parameters"]["type"] == "object");
    CHECK(fn["parameters"]["properties"].size() == 5);
    CHECK(fn["parameters"]["properties"]["is_phishing"]["type"] == "boolean");
}

TEST_CASE("mock provider is deterministic and rule driven") {
    Gateway gw(builtin_mock_profile());
    const auto schema = build_function_schema(PromptVariant::normal);
    auto a = gw.submit(prompt_for("Please VERIFY your account"), schema);
    auto b = gw.submit(prompt_for("Please VERIFY your account"), schema);
    REQUIRE(a.is_structured());
    CHECK(std::get<json>(a.content) == std::get<json>(b.content));
    CHECK(a.input_tokens == b.input_tokens);
    CHECK(a.input_tokens > 0);
    CHECK(a.attempts == 1);
    CHECK(a.latency.count() < 1000.0);

    const auto phish = interpret_response(a, schema, PromptVariant::normal);
    CHECK(phish.is_phishing);
    CHECK(phish.phishing_score == 8);

    const auto legit = interpret_response(gw.submit(prompt_for("Lunch at noon?"), schema), schema, PromptVariant::normal);
    CHECK_FALSE(legit.is_phishing);
    CHECK(legit.phishing_score == 0);

    // the rules look at the body only, not the headers
    SimplifiedEmail hdr;
    hdr.header_block = "Subject: urgent\n";
    hdr.body_text = "see you";
    CHECK_FALSE(interpret_response(gw.submit(render_prompt(hdr, PromptVariant::normal), schema), schema,
                                   PromptVariant::normal)
                    .is_phishing);
}

TEST_CASE("mock honours the simple schema and free-text mode") {
    const auto simple = build_function_schema(PromptVariant::simple);
    Gateway gw(builtin_mock_profile());
    auto r = gw.submit(prompt_for("click here", PromptVariant::simple), simple);
    REQUIRE(r.is_structured());
    CHECK(std::get<json>(r.content) == json{{"is_phishing", true}});

    ProviderProfile text_only = builtin_mock_profile();
    text_only.supports_structured_output = false;
    Gateway text_gw(text_only);
    const auto normal = build_function_schema(PromptVariant::embedded_schema);
    auto t = text_gw.submit(prompt_for("your account is suspended", PromptVariant::embedded_schema), normal);
    CHECK_FALSE(t.is_structured());
    const auto v = interpret_response(t, normal, PromptVariant::embedded_schema);
    CHECK(v.is_phishing);
    CHECK(v.phishing_score == 8);
}

TEST_CASE("custom mock rules") {
    ProviderProfile p = builtin_mock_profile();
    p.mock_rules = {{"invoice", true, 6, "Acme"}};
    Gateway gw(p);
    const auto schema = build_function_schema(PromptVariant::normal);
    const auto v = interpret_response(gw.submit(prompt_for("your Invoice is attached"), schema), schema,
                                      PromptVariant::normal);
    CHECK(v.is_phishing);
    CHECK(v.phishing_score == 6);
    CHECK(v.brand_impersonated == "Acme");
    CHECK_FALSE(interpret_response(gw.submit(prompt_for("click"), schema), schema, PromptVariant::normal).is_phishing);
}

TEST_CASE("requests carry no sampling parameters") {
    auto mock = std::make_shared<MockProvider>(builtin_mock_profile());
    Gateway gw(builtin_mock_profile(), mock);
    gw.submit(prompt_for("hello"), build_function_schema(PromptVariant::normal));
    const auto captured = mock->captured_requests();
    REQUIRE(captured.size() == 1);
    for (const char* key : {"temperature", "top_p", "top_k", "n", "presence_penalty", "frequency_penalty", "seed",
                            "max_tokens", "logit_bias"}) {
        CAPTURE(key);
        CHECK_FALSE(captured[0].contains(key));
    }
    CHECK(captured[0]["tools"][0]["function"]["name"] == "print_phishing_result");
    CHECK(captured[0]["tool_choice"]["function"]["name"] == "print_phishing_result");

    ProviderRequest req{"m", "p", build_function_schema(PromptVariant::normal)};
    const json gemini = build_gemini_body(req);
    CHECK_FALSE(gemini.contains("generationConfig"));
}

TEST_CASE("in-flight requests never exceed the profile cap") {
    for (int cap : {1, 3}) {
        ProviderProfile p = builtin_mock_profile();
        p.max_in_flight = cap;
        p.mock_delay = std::chrono::milliseconds(15);
        auto mock = std::make_shared<MockProvider>(p);
        Gateway gw(p, mock);
        const auto schema = build_function_schema(PromptVariant::normal);
        std::vector<std::thread> threads;
        for (int t = 0; t < 8; ++t) {
            threads.emplace_back([&] {
                for (int i = 0; i < 3; ++i) gw.submit(prompt_for("x"), schema);
            });
        }
        for (auto& t : threads) t.join();
        CAPTURE(cap);
        CHECK(mock->calls() == 24);
        CHECK(mock->max_observed_in_flight() <= cap);
        CHECK(mock->max_observed_in_flight() >= 1);
    }
}

TEST_CASE("profile configuration") {
    const json cfg = json::parse(R"({"profiles": [{
        "name": "gpt4", "api_style": "openai", "endpoint": "https://api.example.test/v1/chat/completions",
        "model_id": "gpt-4", "price_per_1k_input": 0.03, "price_per_1k_output": 0.06,
        "max_in_flight": 2, "timeout_ms": 5000, "credential_env": "OPENAI_API_KEY", "max_attempts": 5}]})");
    const auto profiles = profiles_from_json(cfg);
    REQUIRE(profiles.size() == 2);  // plus the built-in mock
    CHECK(profiles[0].name == "mock");
    CHECK(profiles[1].name == "gpt4");
    CHECK(profiles[1].api_style == ApiStyle::openai);
    CHECK(profiles[1].price_per_1k_input == doctest::Approx(0.03));
    CHECK(profiles[1].max_in_flight == 2);
    CHECK(profiles[1].timeout == std::chrono::milliseconds(5000));
    CHECK(profiles[1].max_attempts == 5);

    CHECK_THROWS_AS(profile_from_json(json{{"name", "x"}, {"unknown", 1}}), ConfigError);
    CHECK_THROWS_AS(profile_from_json(json{{"name", "x"}, {"max_in_flight", 0}}), ConfigError);
    CHECK_THROWS_AS(profile_from_json(json{{"name", "x"}, {"price_per_1k_input", -1}}), ConfigError);
    CHECK_THROWS_AS(profile_from_json(json{{"name", "x"}, {"api_style", "carrier-pigeon"}}), ConfigError);
    CHECK_THROWS_AS(profile_from_json(json{{"name", "x"}, {"max_in_flight", "two"}}), ConfigError);
    CHECK_THROWS_AS(profiles_from_json(json{{"profiles", 3}}), ConfigError);
}

TEST_CASE("missing credential is an AuthError") {
    ProviderProfile p = http_profile(ApiStyle::openai, "http://127.0.0.1:9/v1");
    p.credential_env = "PHISHSCOPE_TEST_SURELY_UNSET_KEY";
    ::unsetenv(p.credential_env.c_str());
    CHECK_THROWS_AS(Gateway{p}, AuthError);
}

TEST_CASE("unreachable endpoint exhausts retries") {
    ProviderProfile p = http_profile(ApiStyle::openai, "http://127.0.0.1:1/v1/chat/completions");
    p.max_attempts = 3;
    Gateway gw(p);
    CHECK_THROWS_AS(gw.submit(prompt_for("x"), build_function_schema(PromptVariant::normal)), TransportError);
}

TEST_CASE("HTTP adapter against a local endpoint") {
    const json args = {{"is_phishing", true}, {"phishing_score", 9}, {"brand_impersonated", "Binance"},
                       {"rationales", "r"}, {"brief_reason", "b"}};
    const auto schema = build_function_schema(PromptVariant::normal);

    SUBCASE("tool call parsed, credential sent") {
        ScriptedServer server({{200, openai_tool_reply(args)}});
        ::setenv("PHISHSCOPE_TEST_KEY", "sk-test", 1);
        ProviderProfile p = http_profile(ApiStyle::openai, server.url("/v1/chat/completions"));
        p.credential_env = "PHISHSCOPE_TEST_KEY";
        Gateway gw(p);
        auto r = gw.submit(prompt_for("hello"), schema);
        REQUIRE(r.is_structured());
        CHECK(std::get<json>(r.content) == args);
        CHECK(r.input_tokens == 1200);
        CHECK(r.output_tokens == 150);
        const auto v = interpret_response(r, schema, PromptVariant::normal);
        CHECK(v.phishing_score == 9);
        auto reqs = server.requests();
        REQUIRE(reqs.size() == 1);
        CHECK(reqs[0].get_header_value("Authorization") == "Bearer sk-test");
        const json sent = json::parse(reqs[0].body);
        CHECK(sent["model"] == "test-model");
        CHECK_FALSE(sent.contains("temperature"));
    }
    SUBCASE("server errors and rate limits are retried") {
        ScriptedServer server({{500, "{}"}, {429, "{}"}, {200, openai_tool_reply(args)}});
        ProviderProfile p = http_profile(ApiStyle::openai, server.url("/v1"));
        Gateway gw(p);
        auto r = gw.submit(prompt_for("hello"), schema);
        CHECK(r.attempts == 3);
        CHECK(server.requests().size() == 3);
        CHECK(r.total_latency >= r.latency);
    }
    SUBCASE("retries are bounded") {
        ScriptedServer server({{503, "{}"}});
        ProviderProfile p = http_profile(ApiStyle::openai, server.url("/v1"));
        p.max_attempts = 2;
        Gateway gw(p);
        CHECK_THROWS_AS(gw.submit(prompt_for("hello"), schema), TransportError);
        CHECK(server.requests().size() == 2);
    }
    SUBCASE("client errors are not retried") {
        ScriptedServer server({{400, R"({"error":"bad"})"}});
        Gateway gw(http_profile(ApiStyle::openai, server.url("/v1")));
        try {
            gw.submit(prompt_for("hello"), schema);
            FAIL("expected ProviderRefusal");
        } catch (const ProviderRefusal& e) {
            CHECK(e.status() == 400);
        }
        CHECK(server.requests().size() == 1);
    }
    SUBCASE("rejected credentials") {
        ScriptedServer server({{401, "{}"}});
        Gateway gw(http_profile(ApiStyle::openai, server.url("/v1")));
        CHECK_THROWS_AS(gw.submit(prompt_for("hello"), schema), AuthError);
        CHECK(server.requests().size() == 1);
    }
    SUBCASE("free-text content") {
        const json reply = {{"choices", json::array({{{"message", {{"content", "```json\n{\"is_phishing\": false, "
                                                                                 "\"phishing_score\": 1}\n```"}}}}})}};
        ScriptedServer server({{200, reply.dump()}});
        ProviderProfile p = http_profile(ApiStyle::openai, server.url("/v1"));
        p.supports_structured_output = false;
        Gateway gw(p);
        auto r = gw.submit(prompt_for("hello", PromptVariant::embedded_schema), schema);
        CHECK_FALSE(r.is_structured());
        CHECK_FALSE(json::parse(server.requests()[0].body).contains("tools"));
        const auto v = interpret_response(r, schema, PromptVariant::embedded_schema);
        CHECK_FALSE(v.is_phishing);
        CHECK(v.phishing_score == 1);
    }
    SUBCASE("azure and gemini wire formats") {
        ScriptedServer azure({{200, openai_tool_reply(args)}});
        ::setenv("PHISHSCOPE_TEST_KEY", "az-key", 1);
        ProviderProfile pa = http_profile(ApiStyle::azure_openai, azure.url("/deployments/gpt4/chat/completions"));
        pa.credential_env = "PHISHSCOPE_TEST_KEY";
        Gateway ga(pa);
        CHECK(ga.submit(prompt_for("x"), schema).is_structured());
        CHECK(azure.requests()[0].get_header_value("api-key") == "az-key");
        CHECK_FALSE(json::parse(azure.requests()[0].body).contains("model"));

        const json gem = {{"candidates", json::array({{{"content", {{"parts", json::array({{{"functionCall",
                                                                                                {{"name", "print_phishing_result"},
                                                                                                 {"args", args}}}}})}}}}})},
                          {"usageMetadata", {{"promptTokenCount", 10}, {"candidatesTokenCount", 4}}}};
        ScriptedServer gemini({{200, gem.dump()}});
        ProviderProfile pg = http_profile(ApiStyle::gemini, gemini.url("/v1beta/models/gemini-pro:generateContent"));
        pg.credential_env = "PHISHSCOPE_TEST_KEY";
        Gateway gg(pg);
        auto r = gg.submit(prompt_for("x"), schema);
        REQUIRE(r.is_structured());
        CHECK(std::get<json>(r.content) == args);
        CHECK(r.input_tokens == 10);
        CHECK(gemini.requests()[0].get_header_value("x-goog-api-key") == "az-key");
        CHECK(json::parse(gemini.requests()[0].body)["tools"][0]["functionDeclarations"][0]["name"] ==
              "print_phishing_result");
    }
}
