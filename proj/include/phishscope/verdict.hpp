#pragma once

#include "phishscope/prompting.hpp"

#include "json.hpp"
#include <optional>
#include <string>
#include <string_view>

namespace phishscope {

/// Structured detection result, keyed like the print_phishing_result function.
struct DetectionVerdict {
    bool is_phishing = false;
    std::optional<int> phishing_score;
    std::string brand_impersonated;  // empty when not applicable
    std::optional<std::string> rationales;
    std::optional<std::string> brief_reason;

    bool operator==(const DetectionVerdict&) const = default;
};

inline constexpr int kMinScore = 0;
inline constexpr int kMaxScore = 10;
inline constexpr std::size_t kMaxRationaleWords = 500;

/// Whitespace-separated token count.
std::size_t word_count(std::string_view text);

/// Checks score range and rationale length; the normal variants also require
/// a score. Throws InvalidScore, RationalesTooLong or MissingField.
const DetectionVerdict& validate_verdict(const DetectionVerdict& verdict, PromptVariant variant);

/// Single-line JSON in schema key order; absent optionals and an empty brand
/// are omitted.
std::string verdict_to_json(const DetectionVerdict& verdict);

/// Map a JSON object onto a verdict. Throws SchemaViolation naming the field
/// on a missing is_phishing or a type mismatch.
DetectionVerdict verdict_from_json(const nlohmann::json& object);

/// Parse the text produced by verdict_to_json (or any JSON object).
DetectionVerdict verdict_from_json_text(std::string_view text);

} // namespace phishscope
