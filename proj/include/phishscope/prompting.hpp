#pragma once

#include "phishscope/simplifier.hpp"
#include "phishscope/tokens.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace phishscope {

/// Which prompt template is rendered. The embedded-schema variants spell the
/// JSON output keys out in the prompt for providers without structured output.
enum class PromptVariant { normal, simple, embedded_schema, embedded_schema_simple };

std::string_view to_string(PromptVariant variant);
std::optional<PromptVariant> parse_prompt_variant(std::string_view name);

/// True for variants whose schema is reduced to `is_phishing`.
bool is_simple(PromptVariant variant);

/// Map a requested normal/simple prompt onto the variant a provider needs.
PromptVariant resolve_variant(PromptVariant requested, bool supports_structured_output);

inline constexpr std::string_view kTemplateVersion = "v1";

/// Template text with the `{{email}}` slot.
std::string_view template_text(PromptVariant variant);

struct RenderedPrompt {
    std::string text;
    PromptVariant variant = PromptVariant::normal;
    std::size_t email_token_count = 0;
};

/// Header block, a blank line, then the body.
std::string serialize_email(const SimplifiedEmail& email);

RenderedPrompt render_prompt(const SimplifiedEmail& email, PromptVariant variant,
                             const TokenizerId& tokenizer = {},
                             const TokenizerRegistry& registry = default_tokenizers());

/// The text occupying the email slot of a rendered prompt, if the prompt
/// has the template's shape.
std::optional<std::string> extract_email_slot(std::string_view prompt_text, PromptVariant variant);

} // namespace phishscope
