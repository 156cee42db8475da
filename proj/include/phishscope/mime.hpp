#pragma once

#include "phishscope/email.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace phishscope {

/// Parse an RFC 5322 message. CRLF and LF line endings are both accepted.
///
/// Headers are unfolded only for decoding; the decoded value keeps the
/// source's continuation line breaks. Leaf bodies are decoded from their
/// transfer encoding and charset to UTF-8. Parts that are attachments are
/// reduced to AttachmentRef. Broken multipart structure degrades to a
/// text/plain leaf holding the raw text.
///
/// Throws MalformedMessage when no header section can be located at all.
ParsedEmail parse_eml(const RawEmail& raw);

/// Decode every RFC 2047 encoded-word (B and Q) in a header value.
/// Whitespace between adjacent encoded-words is dropped. If any encoded-word
/// is malformed the input is returned unchanged. Input without "=?" is
/// returned as is.
std::string decode_header_value(std::string_view raw);

/// Depth-first leaves of the body tree in document order.
std::vector<BodyPart> flatten_body_parts(const ParsedEmail& email);

struct ContentType {
    std::string media_type;  // lower-cased type/subtype
    std::map<std::string, std::string> params;  // lower-cased names
};

/// Parse a Content-Type or Content-Disposition style value, including
/// quoted strings and RFC 2231 extended/continued parameters.
ContentType parse_content_type(std::string_view value);

} // namespace phishscope
