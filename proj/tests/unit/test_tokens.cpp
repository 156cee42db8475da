#include "phishscope/errors.hpp"
#include "phishscope/tokens.hpp"

#include "doctest.h"
#include "generators.hpp"

using namespace phishscope;

TEST_CASE("approx4 counts") {
    TokenizerId approx;
    CHECK(count_tokens("", approx) == 0);
    CHECK(count_tokens("abcd", approx) == 1);
    CHECK(count_tokens("abcde", approx) == 2);
    CHECK(count_tokens("\xC3\xA9", approx) == 1);  // two UTF-8 bytes
}

TEST_CASE("within_budget") {
    TokenizerId approx;
    CHECK(within_budget("abcd", approx, TokenBudget(1)));
    CHECK_FALSE(within_budget("abcdefgh", approx, TokenBudget(1)));
    // 13,000 bytes is 3,250 approx4 tokens: over a 3,000 budget
    CHECK_FALSE(within_budget(std::string(13000, 'x'), approx, TokenBudget(3000)));
    CHECK(within_budget(std::string(12000, 'x'), approx, TokenBudget(3000)));
}

TEST_CASE("budget limit must be positive") {
    CHECK_THROWS_AS(TokenBudget(0), std::invalid_argument);
    CHECK(TokenBudget().limit == 3000);
}

TEST_CASE("unknown tokenizer") {
    CHECK_THROWS_AS(count_tokens("x", TokenizerId{"gpt-nonexistent"}), UnknownTokenizer);
    CHECK_THROWS_AS(within_budget("x", TokenizerId{"nope"}, TokenBudget(5)), UnknownTokenizer);
}

TEST_CASE("registry accepts plug-in schemes") {
    TokenizerRegistry reg;
    reg.register_scheme("words", [](std::string_view s) {
        std::size_t n = 0;
        bool in = false;
        for (char c : s) {
            bool sp = c == ' ';
            if (!sp && !in) ++n;
            in = !sp;
        }
        return n;
    });
    CHECK(reg.contains("words"));
    CHECK(reg.count("two words", TokenizerId{"words"}) == 2);
    CHECK(count_tokens("two words", TokenizerId{"words"}, reg) == 2);
    CHECK_FALSE(default_tokenizers().contains("words"));
}

TEST_CASE("approx4 is monotone and deterministic") {
    testgen::Rng rng(3);
    TokenizerId approx;
    for (int i = 0; i < 1000; ++i) {
        std::string a = testgen::random_text(rng, 50);
        std::string b = testgen::random_text(rng, 50);
        CHECK(count_tokens(a + b, approx) >= count_tokens(a, approx));
        CHECK(count_tokens(a, approx) == count_tokens(a, approx));
    }
}
