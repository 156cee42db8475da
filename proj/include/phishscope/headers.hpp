#pragma once

#include "phishscope/email.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace phishscope {

/// Patterns that are always removed: signatures and custom X- headers.
const std::vector<std::string>& mandatory_header_denylist();

/// Headers that survive sanitization even if a configured pattern matches.
const std::vector<std::string>& protected_headers();

/// Case-insensitive glob match supporting '*' and '?'.
bool glob_match(std::string_view pattern, std::string_view name);

/// Drop signature headers, X- headers and anything matching `extra_denylist`.
/// Retained headers keep their relative order.
ParsedEmail sanitize_headers(ParsedEmail email, const std::vector<std::string>& extra_denylist = {});

/// Replace every To/Cc/Delivered-To value with `dummy`. Occurrences of the
/// replaced addresses inside other header values are substituted as well.
/// Throws std::invalid_argument if `dummy` is not an addr-spec.
ParsedEmail anonymize_recipients(ParsedEmail email, std::string_view dummy);

/// All addr-specs found in an address-list header value.
std::vector<std::string> extract_addresses(std::string_view value);

bool is_valid_address(std::string_view addr);

} // namespace phishscope
