#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phishscope {

/// Raw bytes of one .eml file.
struct RawEmail {
    std::string bytes;
    std::optional<std::string> source_path;
};

struct HeaderField {
    std::string name;
    std::string value;      // decoded, valid UTF-8
    std::string raw_value;  // as found in the source, folding kept (LF line ends)

    bool operator==(const HeaderField&) const = default;
};

/// A node in the MIME body tree. Multipart nodes carry children and no content;
/// leaves carry decoded UTF-8 content and no children.
struct BodyPart {
    std::string media_type = "text/plain";
    std::string charset;
    std::string transfer_encoding;
    std::string content;
    std::vector<BodyPart> children;

    bool is_multipart() const { return media_type.starts_with("multipart/"); }
    bool is_html() const { return media_type == "text/html"; }
    bool is_plain() const { return media_type == "text/plain"; }

    bool operator==(const BodyPart&) const = default;
};

/// Attachments keep only their name and declared type; payloads are dropped.
struct AttachmentRef {
    std::string filename;
    std::string declared_media_type;

    bool operator==(const AttachmentRef&) const = default;
};

struct ParsedEmail {
    std::vector<HeaderField> headers;
    BodyPart body;
    std::vector<AttachmentRef> attachments;

    /// First header with the given name (case-insensitive), if any.
    const HeaderField* find_header(std::string_view name) const;

    bool operator==(const ParsedEmail&) const = default;
};

bool iequals(std::string_view a, std::string_view b);
std::string to_lower(std::string_view s);

} // namespace phishscope
