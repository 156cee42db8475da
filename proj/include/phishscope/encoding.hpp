#pragma once

// Content decoders shared by header and body handling.

#include <optional>
#include <string>
#include <string_view>

namespace phishscope {

/// Strict base64 decode: whitespace is skipped, missing trailing padding is
/// tolerated, any other character outside the alphabet fails.
std::optional<std::string> base64_decode_strict(std::string_view in);

/// Lenient base64 decode for bodies: characters outside the alphabet are skipped.
std::string base64_decode_lenient(std::string_view in);

/// Quoted-printable body decode. Soft line breaks are joined; malformed
/// escapes are kept literally.
std::string quoted_printable_decode(std::string_view in);

/// The "Q" encoding of encoded-words. Fails on a malformed =XX escape.
std::optional<std::string> q_decode(std::string_view in);

/// Convert bytes in `charset` to UTF-8. Invalid sequences become U+FFFD.
/// Unknown charsets are treated as UTF-8.
std::string to_utf8(std::string_view bytes, std::string_view charset);

/// Replace every ill-formed UTF-8 subsequence with U+FFFD (maximal-subpart rule).
std::string repair_utf8(std::string_view bytes);

bool is_valid_utf8(std::string_view bytes);

} // namespace phishscope
