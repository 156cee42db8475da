#pragma once

#include "phishscope/email.hpp"
#include "phishscope/tokens.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace phishscope {

enum class BodyKind { html, plain };

std::string_view to_string(BodyKind kind);

/// Step names recorded in SimplifiedEmail::reduction_log.
namespace steps {
inline constexpr std::string_view organize_multipart = "organize_multipart";
inline constexpr std::string_view prune_html = "prune_html";
inline constexpr std::string_view trim_html_center = "trim_html_center";
inline constexpr std::string_view trim_plain_middle = "trim_plain_middle";
} // namespace steps

struct SimplifiedEmail {
    std::string header_block;  // "Name: value\n" lines
    std::string body_text;
    BodyKind body_kind = BodyKind::plain;
    std::vector<std::string> reduction_log;

    bool operator==(const SimplifiedEmail&) const = default;
};

struct PruneOptions {
    std::vector<std::string> keep_attributes = {"src", "href", "alt", "title", "name", "id", "class"};
    std::size_t url_remainder_chars = 10;
};

struct SimplifyOptions {
    PruneOptions prune;
    std::string elision_marker = "[...]";
    const TokenizerRegistry* tokenizers = &default_tokenizers();
};

/// Header lines followed by one "Attachment: name (type)" line per attachment.
std::string render_header_block(const ParsedEmail& email);

/// Leaves joined by a blank line: the body as it looks before any reduction.
std::string render_full_body(const std::vector<BodyPart>& leaves);

/// First text/html leaf, else first text/plain leaf, else the first leaf.
/// Throws NoBody on an empty list.
const BodyPart& select_preferred_part(const std::vector<BodyPart>& parts);

/// Keep scheme and authority, cut the rest of the URL to `keep` characters
/// (a leading '/' is not counted).
std::string truncate_url(std::string_view url, std::size_t keep = 10);

/// Remove comments/style/script, drop non-allowlisted attributes, remove
/// elements without text (unless they carry src/href), unwrap font/strong/b,
/// shorten img src and a href.
std::string prune_html(std::string_view html, const PruneOptions& options = {});

/// Remove the middle node of the post-order node list until
/// `prefix + result` fits the budget. Throws BudgetUnreachable when even
/// `prefix` alone does not fit.
std::string trim_html_center(std::string_view html, const TokenizerId& tokenizer, const TokenBudget& budget,
                             std::string_view prefix = {},
                             const TokenizerRegistry& registry = default_tokenizers());

/// Remove the middle line until `prefix + result` fits; the removed region is
/// replaced by a single marker line.
std::string trim_plain_middle(std::string_view text, const TokenizerId& tokenizer, const TokenBudget& budget,
                              std::string_view prefix = {}, std::string_view marker = "[...]",
                              const TokenizerRegistry& registry = default_tokenizers());

/// Reduce an email to the budget, stopping at the first step that fits.
SimplifiedEmail simplify(const ParsedEmail& email, const TokenizerId& tokenizer, const TokenBudget& budget,
                         const SimplifyOptions& options = {});

} // namespace phishscope
