#include "phishscope/html.hpp"

#include <algorithm>
#include <array>

namespace phishscope::html {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }

bool is_raw_text(std::string_view tag) {
    return tag == "script" || tag == "style" || tag == "textarea" || tag == "title" || tag == "xmp";
}

bool closes_paragraph(std::string_view tag) {
    static constexpr std::array<std::string_view, 24> tags = {
        "address", "article", "aside", "blockquote", "div", "dl", "fieldset", "footer",
        "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main", "nav", "ol",
        "p", "pre", "table", "ul"};
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

// Case-insensitive search for `needle` (already lower-case) in `hay` from `from`.
size_t ifind(std::string_view hay, std::string_view needle, size_t from) {
    if (needle.empty()) return from;
    for (size_t i = from; i + needle.size() <= hay.size(); ++i) {
        if (lower(hay[i]) != needle[0]) continue;
        size_t k = 1;
        while (k < needle.size() && lower(hay[i + k]) == needle[k]) ++k;
        if (k == needle.size()) return i;
    }
    return std::string_view::npos;
}

class TreeBuilder {
public:
    explicit TreeBuilder(Node& doc) { stack_.push_back(&doc); }

    Node& current() { return *stack_.back(); }

    void text(std::string_view t) {
        if (t.empty()) return;
        auto& kids = current().children;
        if (!kids.empty() && kids.back().kind == Node::Kind::text) {
            kids.back().text.append(t);
            return;
        }
        Node n;
        n.kind = Node::Kind::text;
        n.text = std::string(t);
        kids.push_back(std::move(n));
    }

    void leaf(Node::Kind kind, std::string_view body) {
        Node n;
        n.kind = kind;
        n.text = std::string(body);
        current().children.push_back(std::move(n));
    }

    // Returns the new element; it is on the stack unless void/self-closing.
    Node& open(Node element, bool self_closing) {
        implicit_close(element.name);
        auto& kids = current().children;
        kids.push_back(std::move(element));
        Node& added = kids.back();
        if (!self_closing && !is_void_element(added.name)) stack_.push_back(&added);
        return added;
    }

    void close(std::string_view tag) {
        for (size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->name == tag) {
                stack_.resize(i);
                return;
            }
        }
    }

private:
    bool open_within(std::string_view tag, std::initializer_list<std::string_view> scope, size_t& at) const {
        for (size_t i = stack_.size(); i-- > 1;) {
            const auto& n = stack_[i]->name;
            if (n == tag) {
                at = i;
                return true;
            }
            if (std::find(scope.begin(), scope.end(), n) != scope.end()) return false;
        }
        return false;
    }

    void implicit_close(std::string_view tag) {
        size_t at = 0;
        if (closes_paragraph(tag) && open_within("p", {"div", "td", "th", "table", "li", "blockquote", "body"}, at)) {
            stack_.resize(at);
        }
        if (tag == "li" && open_within("li", {"ul", "ol"}, at)) stack_.resize(at);
        if ((tag == "dt" || tag == "dd") && (open_within("dd", {"dl"}, at) || open_within("dt", {"dl"}, at))) {
            stack_.resize(at);
        }
        if ((tag == "td" || tag == "th") &&
            (open_within("td", {"tr", "table"}, at) || open_within("th", {"tr", "table"}, at))) {
            stack_.resize(at);
        }
        if (tag == "tr" && open_within("tr", {"table"}, at)) stack_.resize(at);
        if (tag == "option" && open_within("option", {"select"}, at)) stack_.resize(at);
    }

    std::vector<Node*> stack_;
};

class Parser {
public:
    Parser(std::string_view in, Node& doc) : in_(in), tree_(doc) {}

    void run() {
        size_t text_start = 0;
        while (pos_ < in_.size()) {
            if (in_[pos_] != '<' || pos_ + 1 >= in_.size()) {
                ++pos_;
                continue;
            }
            char next = in_[pos_ + 1];
            if (!(is_alpha(next) || next == '/' || next == '!' || next == '?')) {
                ++pos_;
                continue;
            }
            tree_.text(in_.substr(text_start, pos_ - text_start));
            markup();
            text_start = pos_;
        }
        tree_.text(in_.substr(text_start));
    }

private:
    void markup() {
        char next = in_[pos_ + 1];
        if (next == '!') {
            if (in_.substr(pos_, 4) == "<!--") {
                size_t end = in_.find("-->", pos_ + 4);
                size_t body_end = end == std::string_view::npos ? in_.size() : end;
                tree_.leaf(Node::Kind::comment, in_.substr(pos_ + 4, body_end - pos_ - 4));
                pos_ = end == std::string_view::npos ? in_.size() : end + 3;
                return;
            }
            size_t end = in_.find('>', pos_);
            size_t body_end = end == std::string_view::npos ? in_.size() : end;
            std::string_view body = in_.substr(pos_ + 2, body_end - pos_ - 2);
            const bool doctype = body.size() >= 7 && ifind(body.substr(0, 7), "doctype", 0) == 0;
            tree_.leaf(doctype ? Node::Kind::doctype : Node::Kind::comment, body);
            pos_ = end == std::string_view::npos ? in_.size() : end + 1;
            return;
        }
        if (next == '?') {
            size_t end = in_.find('>', pos_);
            size_t body_end = end == std::string_view::npos ? in_.size() : end;
            tree_.leaf(Node::Kind::comment, in_.substr(pos_ + 1, body_end - pos_ - 1));
            pos_ = end == std::string_view::npos ? in_.size() : end + 1;
            return;
        }
        if (next == '/') {
            end_tag();
            return;
        }
        start_tag();
    }

    std::string read_name() {
        std::string name;
        while (pos_ < in_.size() && !is_space(in_[pos_]) && in_[pos_] != '>' && in_[pos_] != '/') {
            name.push_back(lower(in_[pos_++]));
        }
        return name;
    }

    void skip_to_gt() {
        size_t end = in_.find('>', pos_);
        pos_ = end == std::string_view::npos ? in_.size() : end + 1;
    }

    void end_tag() {
        pos_ += 2;
        if (pos_ >= in_.size() || !is_alpha(in_[pos_])) {
            // bogus comment such as "</ >" or "</3"
            size_t start = std::min(pos_, in_.size());
            size_t end = in_.find('>', start);
            size_t body_end = end == std::string_view::npos ? in_.size() : end;
            tree_.leaf(Node::Kind::comment, in_.substr(start, body_end - start));
            pos_ = end == std::string_view::npos ? in_.size() : end + 1;
            return;
        }
        std::string name = read_name();
        skip_to_gt();
        tree_.close(name);
    }

    void start_tag() {
        ++pos_;
        Node el;
        el.kind = Node::Kind::element;
        el.name = read_name();
        bool self_closing = false;
        while (pos_ < in_.size()) {
            char c = in_[pos_];
            if (is_space(c)) {
                ++pos_;
                continue;
            }
            if (c == '>') {
                ++pos_;
                break;
            }
            if (c == '/') {
                ++pos_;
                if (pos_ < in_.size() && in_[pos_] == '>') {
                    self_closing = true;
                    ++pos_;
                    break;
                }
                continue;
            }
            Attribute attr;
            while (pos_ < in_.size() && !is_space(in_[pos_]) && in_[pos_] != '>' && in_[pos_] != '=' &&
                   !(in_[pos_] == '/' && attr.name.size() > 0)) {
                attr.name.push_back(lower(in_[pos_++]));
            }
            size_t look = pos_;
            while (look < in_.size() && is_space(in_[look])) ++look;
            if (look < in_.size() && in_[look] == '=') {
                pos_ = look + 1;
                while (pos_ < in_.size() && is_space(in_[pos_])) ++pos_;
                if (pos_ < in_.size() && (in_[pos_] == '"' || in_[pos_] == '\'')) {
                    char q = in_[pos_++];
                    size_t end = in_.find(q, pos_);
                    if (end == std::string_view::npos) end = in_.size();
                    attr.value = std::string(in_.substr(pos_, end - pos_));
                    pos_ = std::min(end + 1, in_.size());
                } else {
                    size_t start = pos_;
                    while (pos_ < in_.size() && !is_space(in_[pos_]) && in_[pos_] != '>') ++pos_;
                    attr.value = std::string(in_.substr(start, pos_ - start));
                }
            } else {
                attr.has_value = false;
            }
            if (attr.name.empty()) {
                ++pos_;  // stray character such as '=' or a quote
                continue;
            }
            if (!el.attribute(attr.name)) el.attributes.push_back(std::move(attr));
        }

        Node& added = tree_.open(std::move(el), self_closing);
        if (!self_closing && is_raw_text(added.name)) {
            std::string closer = "</" + added.name;
            size_t end = ifind(in_, closer, pos_);
            size_t body_end = end == std::string_view::npos ? in_.size() : end;
            tree_.text(in_.substr(pos_, body_end - pos_));
            pos_ = body_end;
            if (end != std::string_view::npos) {
                pos_ = end + closer.size();
                skip_to_gt();
                tree_.close(added.name);
            }
        }
    }

    std::string_view in_;
    size_t pos_ = 0;
    TreeBuilder tree_;
};

void escape_attr(std::string& out, std::string_view v) {
    for (char c : v) {
        if (c == '"') {
            out += "&quot;";
        } else {
            out.push_back(c);
        }
    }
}

void serialize_into(std::string& out, const Node& n) {
    switch (n.kind) {
    case Node::Kind::document:
        for (const auto& c : n.children) serialize_into(out, c);
        return;
    case Node::Kind::text:
        out += n.text;
        return;
    case Node::Kind::comment:
        out += "<!--";
        out += n.text;
        out += "-->";
        return;
    case Node::Kind::doctype:
        out += "<!";
        out += n.text;
        out += ">";
        return;
    case Node::Kind::element:
        out.push_back('<');
        out += n.name;
        for (const auto& a : n.attributes) {
            out.push_back(' ');
            out += a.name;
            if (a.has_value) {
                out += "=\"";
                escape_attr(out, a.value);
                out.push_back('"');
            }
        }
        out.push_back('>');
        if (is_void_element(n.name)) return;
        for (const auto& c : n.children) serialize_into(out, c);
        out += "</";
        out += n.name;
        out.push_back('>');
        return;
    }
}

} // namespace

const Attribute* Node::attribute(std::string_view attr) const {
    for (const auto& a : attributes) {
        if (a.name == attr) return &a;
    }
    return nullptr;
}

Attribute* Node::attribute(std::string_view attr) {
    for (auto& a : attributes) {
        if (a.name == attr) return &a;
    }
    return nullptr;
}

bool is_void_element(std::string_view tag) {
    static constexpr std::array<std::string_view, 16> tags = {
        "area", "base", "br", "col", "embed", "hr", "img", "input",
        "keygen", "link", "meta", "param", "source", "track", "wbr", "basefont"};
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

bool has_visible_text(std::string_view t) {
    static constexpr std::array<std::string_view, 12> invisible = {
        "&nbsp;", "&#160;", "&#xa0;", "&#xA0;", "&zwnj;", "&zwj;", "&#8204;", "&#8203;",
        "\xC2\xA0", "\xE2\x80\x8B", "\xE2\x80\x8C", "\xEF\xBB\xBF"};
    size_t i = 0;
    while (i < t.size()) {
        if (is_space(t[i])) {
            ++i;
            continue;
        }
        bool skipped = false;
        for (auto inv : invisible) {
            if (t.substr(i, inv.size()) == inv) {
                i += inv.size();
                skipped = true;
                break;
            }
        }
        if (!skipped) return true;
    }
    return false;
}

Node parse(std::string_view input) {
    Node doc;
    Parser(input, doc).run();
    return doc;
}

std::string serialize(const Node& node) {
    std::string out;
    serialize_into(out, node);
    return out;
}

} // namespace phishscope::html
