#pragma once

#include "phishscope/gateway.hpp"
#include "phishscope/verdict.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace phishscope {

/// Map structured function-call arguments onto a verdict. Throws
/// SchemaViolation (field "(root)" when the response is free text).
DetectionVerdict parse_structured(const RawModelResponse& response, const ResponseSchema& schema);

/// Recover a verdict from free text: first the outermost balanced object
/// holding "is_phishing" (repairing single quotes, trailing commas, bare keys
/// and Python literals), then keyword patterns. Throws Unparseable.
DetectionVerdict extract_json_fallback(std::string_view text);

/// Apply the relaxed JSON repairs used by extract_json_fallback. Text inside
/// double-quoted strings is left alone.
std::string normalize_loose_json(std::string_view text);

/// Structured or free text, whichever the response holds, then validated
/// against the variant.
DetectionVerdict interpret_response(const RawModelResponse& response, const ResponseSchema& schema,
                                    PromptVariant variant);

} // namespace phishscope
