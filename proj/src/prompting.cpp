#include "phishscope/prompting.hpp"

#include "prompt_templates.generated.hpp"

namespace phishscope {

namespace {

constexpr std::string_view kSlot = "{{email}}";

struct Split {
    std::string_view before;
    std::string_view after;
};

Split split_template(PromptVariant variant) {
    auto t = template_text(variant);
    auto at = t.find(kSlot);
    return {t.substr(0, at), t.substr(at + kSlot.size())};
}

} // namespace

std::string_view to_string(PromptVariant variant) {
    switch (variant) {
    case PromptVariant::normal: return "normal";
    case PromptVariant::simple: return "simple";
    case PromptVariant::embedded_schema: return "embedded_schema";
    case PromptVariant::embedded_schema_simple: return "embedded_schema_simple";
    }
    return "normal";
}

std::optional<PromptVariant> parse_prompt_variant(std::string_view name) {
    for (auto v : {PromptVariant::normal, PromptVariant::simple, PromptVariant::embedded_schema,
                   PromptVariant::embedded_schema_simple}) {
        if (to_string(v) == name) return v;
    }
    return std::nullopt;
}

bool is_simple(PromptVariant variant) {
    return variant == PromptVariant::simple || variant == PromptVariant::embedded_schema_simple;
}

PromptVariant resolve_variant(PromptVariant requested, bool supports_structured_output) {
    const bool simple = is_simple(requested);
    if (supports_structured_output) return simple ? PromptVariant::simple : PromptVariant::normal;
    return simple ? PromptVariant::embedded_schema_simple : PromptVariant::embedded_schema;
}

std::string_view template_text(PromptVariant variant) {
    switch (variant) {
    case PromptVariant::normal: return templates::kNormal;
    case PromptVariant::simple: return templates::kSimple;
    case PromptVariant::embedded_schema: return templates::kEmbeddedSchema;
    case PromptVariant::embedded_schema_simple: return templates::kEmbeddedSchemaSimple;
    }
    return templates::kNormal;
}

std::string serialize_email(const SimplifiedEmail& email) {
    std::string out = email.header_block;
    out += '\n';
    out += email.body_text;
    return out;
}

RenderedPrompt render_prompt(const SimplifiedEmail& email, PromptVariant variant, const TokenizerId& tokenizer,
                             const TokenizerRegistry& registry) {
    const auto parts = split_template(variant);
    const std::string serialized = serialize_email(email);
    RenderedPrompt out;
    out.variant = variant;
    out.email_token_count = registry.count(serialized, tokenizer);
    out.text.reserve(parts.before.size() + serialized.size() + parts.after.size());
    out.text.append(parts.before).append(serialized).append(parts.after);
    return out;
}

std::optional<std::string> extract_email_slot(std::string_view prompt_text, PromptVariant variant) {
    const auto parts = split_template(variant);
    if (prompt_text.size() < parts.before.size() + parts.after.size()) return std::nullopt;
    if (!prompt_text.starts_with(parts.before) || !prompt_text.ends_with(parts.after)) return std::nullopt;
    return std::string(prompt_text.substr(parts.before.size(),
                                          prompt_text.size() - parts.before.size() - parts.after.size()));
}

} // namespace phishscope
