#pragma once

#include "phishscope/prompting.hpp"
#include "phishscope/tokens.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace phishscope {

// ---------------------------------------------------------------------------
// Response schema
// ---------------------------------------------------------------------------

struct SchemaProperty {
    std::string name;
    std::string type;  // JSON schema type
    std::string description;

    bool operator==(const SchemaProperty&) const = default;
};

struct ResponseSchema {
    std::string function_name = "print_phishing_result";
    std::string description = "Outputs whether a given email is a phishing email or a legitimate email.";
    std::vector<SchemaProperty> properties;

    const SchemaProperty* property(std::string_view name) const;

    /// {"name", "description", "parameters": {JSON schema}} as used by
    /// function-calling APIs.
    nlohmann::json to_function_json() const;
};

/// Five properties for the normal prompt, only is_phishing for the simple one.
ResponseSchema build_function_schema(PromptVariant variant);

// ---------------------------------------------------------------------------
// Provider profile
// ---------------------------------------------------------------------------

enum class ApiStyle { mock, openai, azure_openai, gemini };

std::string_view to_string(ApiStyle style);

/// Keyword rule of the offline mock provider.
struct MockRule {
    std::string keyword;  // matched case-insensitively in the email body
    bool is_phishing = true;
    int score = 8;
    std::string brand;
};

std::vector<MockRule> default_mock_rules();

struct ProviderProfile {
    std::string name = "mock";
    ApiStyle api_style = ApiStyle::mock;
    std::string endpoint;
    std::string model_id = "mock-keyword-rules";
    bool supports_structured_output = true;
    TokenizerId tokenizer;
    double price_per_1k_input = 0.0;   // USD
    double price_per_1k_output = 0.0;  // USD
    int max_in_flight = 4;
    std::chrono::milliseconds timeout{60000};
    std::string credential_env;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};

    // mock only
    std::vector<MockRule> mock_rules = default_mock_rules();
    std::chrono::milliseconds mock_delay{0};

    /// Throws ConfigError when an invariant is broken.
    void validate() const;
};

ProviderProfile builtin_mock_profile();

/// Parse one profile object. Unknown keys are rejected.
ProviderProfile profile_from_json(const nlohmann::json& object);

/// Profiles listed under "profiles" plus the built-in mock profile (unless
/// the file redefines "mock").
std::vector<ProviderProfile> profiles_from_json(const nlohmann::json& config);

// ---------------------------------------------------------------------------
// Requests and responses
// ---------------------------------------------------------------------------

struct ProviderRequest {
    std::string model_id;
    std::string prompt;
    std::optional<ResponseSchema> schema;  // absent for free-text providers
};

struct RawModelResponse {
    std::variant<std::string, nlohmann::json> content;  // free text or structured arguments
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    std::chrono::duration<double, std::milli> latency{0};        // last attempt
    std::chrono::duration<double, std::milli> total_latency{0};  // including retries and backoff
    int attempts = 1;

    bool is_structured() const { return std::holds_alternative<nlohmann::json>(content); }
};

/// Chat-completions body with one forced tool call. No sampling parameters are
/// set, so the provider defaults apply.
nlohmann::json build_openai_chat_body(const ProviderRequest& request);
nlohmann::json build_gemini_body(const ProviderRequest& request);

/// One provider adapter. complete() performs a single attempt and throws
/// TransportError (retryable), AuthError or ProviderRefusal.
class Provider {
public:
    virtual ~Provider() = default;
    virtual RawModelResponse complete(const ProviderRequest& request) = 0;
};

/// Deterministic keyword-rule engine standing in for a model.
class MockProvider : public Provider {
public:
    explicit MockProvider(ProviderProfile profile);

    RawModelResponse complete(const ProviderRequest& request) override;

    int max_observed_in_flight() const { return max_in_flight_.load(); }
    std::size_t calls() const { return calls_.load(); }
    /// Wire bodies the mock would have sent, in call order.
    std::vector<nlohmann::json> captured_requests() const;

private:
    ProviderProfile profile_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::atomic<std::size_t> calls_{0};
    mutable std::mutex mutex_;
    std::vector<nlohmann::json> captured_;
};

/// HTTP adapter for the OpenAI, Azure OpenAI and Gemini wire formats.
class HttpProvider : public Provider {
public:
    /// Reads the credential from the profile's environment variable; throws
    /// AuthError if it is required and unset.
    explicit HttpProvider(ProviderProfile profile);

    RawModelResponse complete(const ProviderRequest& request) override;

private:
    ProviderProfile profile_;
    std::string credential_;
};

std::shared_ptr<Provider> make_provider(const ProviderProfile& profile);

/// Submits prompts through one provider, retrying transport errors with
/// exponential backoff and capping in-flight requests at the profile limit.
class Gateway {
public:
    Gateway(ProviderProfile profile, std::shared_ptr<Provider> provider);
    explicit Gateway(ProviderProfile profile);

    RawModelResponse submit(const RenderedPrompt& prompt, const ResponseSchema& schema);

    const ProviderProfile& profile() const { return profile_; }
    Provider& provider() { return *provider_; }

private:
    class Slot;

    ProviderProfile profile_;
    std::shared_ptr<Provider> provider_;
    std::mutex mutex_;
    std::condition_variable cv_;
    int in_flight_ = 0;
};

} // namespace phishscope
