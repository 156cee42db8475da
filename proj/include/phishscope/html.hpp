#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace phishscope::html {

struct Attribute {
    std::string name;  // lower-cased
    std::string value;
    bool has_value = true;

    bool operator==(const Attribute&) const = default;
};

struct Node {
    enum class Kind { document, element, text, comment, doctype };

    Kind kind = Kind::document;
    std::string name;  // lower-cased tag name for elements
    std::vector<Attribute> attributes;
    std::string text;  // text, comment body or doctype body
    std::vector<Node> children;

    bool is_element() const { return kind == Kind::element; }
    bool is_element(std::string_view tag) const { return kind == Kind::element && name == tag; }
    const Attribute* attribute(std::string_view attr) const;
    Attribute* attribute(std::string_view attr);

    bool operator==(const Node&) const = default;
};

/// Parses arbitrary (possibly malformed) HTML into a document node. Never throws.
/// Character references are left undecoded so that serialization round-trips.
Node parse(std::string_view input);

std::string serialize(const Node& node);

bool is_void_element(std::string_view tag);

/// True if `text` contains anything besides whitespace, &nbsp; and zero-width characters.
bool has_visible_text(std::string_view text);

} // namespace phishscope::html
