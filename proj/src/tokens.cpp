#include "phishscope/tokens.hpp"

#include "phishscope/errors.hpp"

#include <stdexcept>

namespace phishscope {

TokenBudget::TokenBudget(std::size_t l) : limit(l) {
    if (limit < 1) throw std::invalid_argument("token limit must be at least 1");
}

std::size_t approx4_count(std::string_view text) { return (text.size() + 3) / 4; }

TokenizerRegistry::TokenizerRegistry() { schemes_.emplace("approx4", approx4_count); }

void TokenizerRegistry::register_scheme(std::string name, TokenCounter counter) {
    schemes_.insert_or_assign(std::move(name), std::move(counter));
}

bool TokenizerRegistry::contains(std::string_view name) const { return schemes_.find(name) != schemes_.end(); }

std::size_t TokenizerRegistry::count(std::string_view text, const TokenizerId& id) const {
    auto it = schemes_.find(id.name);
    if (it == schemes_.end()) throw UnknownTokenizer(id.name);
    return it->second(text);
}

const TokenizerRegistry& default_tokenizers() {
    static const TokenizerRegistry registry;
    return registry;
}

std::size_t count_tokens(std::string_view text, const TokenizerId& tokenizer, const TokenizerRegistry& registry) {
    return registry.count(text, tokenizer);
}

bool within_budget(std::string_view text, const TokenizerId& tokenizer, const TokenBudget& budget,
                   const TokenizerRegistry& registry) {
    return count_tokens(text, tokenizer, registry) <= budget.limit;
}

} // namespace phishscope
