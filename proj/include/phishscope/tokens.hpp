#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>

namespace phishscope {

struct TokenizerId {
    std::string name = "approx4";

    bool operator==(const TokenizerId&) const = default;
};

struct TokenBudget {
    std::size_t limit = 3000;

    /// Throws std::invalid_argument for a zero limit.
    explicit TokenBudget(std::size_t limit = 3000);
};

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Named token counting schemes. Populate at startup, then share read-only.
class TokenizerRegistry {
public:
    /// A registry holding the built-in `approx4` scheme.
    TokenizerRegistry();

    void register_scheme(std::string name, TokenCounter counter);
    bool contains(std::string_view name) const;
    std::size_t count(std::string_view text, const TokenizerId& id) const;

private:
    std::map<std::string, TokenCounter, std::less<>> schemes_;
};

/// The process-wide registry with built-in schemes only.
const TokenizerRegistry& default_tokenizers();

/// ceil(utf8 byte length / 4)
std::size_t approx4_count(std::string_view text);

std::size_t count_tokens(std::string_view text, const TokenizerId& tokenizer,
                         const TokenizerRegistry& registry = default_tokenizers());

bool within_budget(std::string_view text, const TokenizerId& tokenizer, const TokenBudget& budget,
                   const TokenizerRegistry& registry = default_tokenizers());

} // namespace phishscope
