#include "phishscope/mime.hpp"

#include "phishscope/encoding.hpp"
#include "phishscope/errors.hpp"

#include <charconv>

namespace phishscope {

namespace {

constexpr int kMaxDepth = 32;

bool is_wsp(char c) { return c == ' ' || c == '\t'; }
bool is_fws(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_fws(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_fws(s.back())) s.remove_suffix(1);
    return s;
}

std::string normalize_newlines(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    for (size_t i = 0; i < in.size(); ++i) {
        if (in[i] == '\r' && i + 1 < in.size() && in[i + 1] == '\n') continue;
        out.push_back(in[i]);
    }
    return out;
}

// Length of the header name if `line` starts a header field, else 0.
size_t header_name_length(std::string_view line) {
    size_t i = 0;
    while (i < line.size()) {
        auto c = static_cast<unsigned char>(line[i]);
        if (c == ':' || c <= 32 || c >= 127) break;
        ++i;
    }
    if (i == 0) return 0;
    size_t j = i;
    while (j < line.size() && is_wsp(line[j])) ++j;
    return (j < line.size() && line[j] == ':') ? i : 0;
}

struct Entity {
    std::vector<HeaderField> headers;
    std::string_view body;
};

std::vector<HeaderField> parse_header_lines(std::string_view block) {
    std::vector<HeaderField> out;
    size_t pos = 0;
    bool have_current = false;
    std::string raw;
    auto flush = [&] {
        if (!have_current) return;
        auto value = trim(raw);
        auto& h = out.back();
        h.raw_value = repair_utf8(value);
        h.value = decode_header_value(h.raw_value);
        raw.clear();
        have_current = false;
    };
    while (pos < block.size()) {
        size_t eol = block.find('\n', pos);
        if (eol == std::string_view::npos) eol = block.size();
        std::string_view line = block.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && is_wsp(line.front())) {
            if (have_current) {
                raw.push_back('\n');
                raw.append(line);
            }
            continue;
        }
        if (size_t n = header_name_length(line); n > 0) {
            flush();
            HeaderField h;
            h.name = std::string(line.substr(0, n));
            out.push_back(std::move(h));
            raw.assign(line.substr(line.find(':') + 1));
            have_current = true;
        } else {
            // not a header line; ignore it
            flush();
        }
    }
    flush();
    return out;
}

// Split an entity at its first blank line. Without one, the leading run of
// header lines forms the header section. Returns false when no header
// section exists at all.
bool split_entity(std::string_view text, Entity& out) {
    size_t pos = 0;
    size_t header_prefix_end = 0;
    bool in_prefix = true;
    bool seen_header = false;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        const bool last = eol == std::string_view::npos;
        if (last) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        if (line.empty() && !last) {
            out.headers = parse_header_lines(text.substr(0, pos));
            out.body = text.substr(eol + 1);
            return true;
        }
        if (in_prefix) {
            if (header_name_length(line) > 0) {
                seen_header = true;
                header_prefix_end = last ? eol : eol + 1;
            } else if (seen_header && !line.empty() && is_wsp(line.front())) {
                header_prefix_end = last ? eol : eol + 1;
            } else if (!line.empty()) {
                in_prefix = false;
            }
        }
        if (last) break;
        pos = eol + 1;
    }
    if (header_prefix_end == 0) return false;
    out.headers = parse_header_lines(text.substr(0, header_prefix_end));
    out.body = text.substr(std::min(header_prefix_end, text.size()));
    return true;
}

const HeaderField* find(const std::vector<HeaderField>& headers, std::string_view name) {
    for (const auto& h : headers) {
        if (iequals(h.name, name)) return &h;
    }
    return nullptr;
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::string percent_decode(std::string_view s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            int hi = hex_digit(s[i + 1]);
            int lo = hex_digit(s[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out.push_back(static_cast<char>(hi * 16 + lo));
                i += 2;
                continue;
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

// Splits "a; b=c; d=\"e;f\"" on top-level semicolons.
std::vector<std::string_view> split_params(std::string_view value) {
    std::vector<std::string_view> out;
    size_t start = 0;
    bool quoted = false;
    for (size_t i = 0; i < value.size(); ++i) {
        char c = value[i];
        if (quoted && c == '\\') {
            ++i;
        } else if (c == '"') {
            quoted = !quoted;
        } else if (c == ';' && !quoted) {
            out.push_back(value.substr(start, i - start));
            start = i + 1;
        }
    }
    out.push_back(value.substr(start));
    return out;
}

std::string unquote(std::string_view v) {
    v = trim(v);
    if (v.size() >= 2 && v.front() == '"') {
        std::string out;
        for (size_t i = 1; i < v.size(); ++i) {
            if (v[i] == '\\' && i + 1 < v.size()) {
                out.push_back(v[++i]);
            } else if (v[i] == '"') {
                break;
            } else {
                out.push_back(v[i]);
            }
        }
        return out;
    }
    return std::string(v);
}

std::string decode_transfer(std::string_view body, std::string_view cte) {
    if (cte == "base64") return base64_decode_lenient(body);
    if (cte == "quoted-printable") return quoted_printable_decode(body);
    return std::string(body);
}

struct Walker {
    std::vector<AttachmentRef>& attachments;

    BodyPart degrade(std::string_view raw) {
        BodyPart leaf;
        leaf.media_type = "text/plain";
        leaf.content = repair_utf8(raw);
        return leaf;
    }

    // Returns nullopt when the entity was routed to the attachment list.
    std::optional<BodyPart> walk(const std::vector<HeaderField>& headers, std::string_view body, int depth) {
        ContentType ct{"text/plain", {}};
        if (const auto* h = find(headers, "Content-Type")) {
            ct = parse_content_type(h->raw_value);
            if (ct.media_type.find('/') == std::string::npos) ct.media_type = "text/plain";
        }
        std::string cte;
        if (const auto* h = find(headers, "Content-Transfer-Encoding")) cte = to_lower(trim(h->raw_value));

        if (ct.media_type.starts_with("multipart/")) {
            auto boundary = ct.params.find("boundary");
            if (boundary == ct.params.end() || boundary->second.empty() || depth >= kMaxDepth) return degrade(body);
            auto parts = split_multipart(body, boundary->second);
            if (!parts) return degrade(body);
            BodyPart node;
            node.media_type = ct.media_type;
            node.transfer_encoding = cte;
            for (auto part_text : *parts) {
                Entity e;
                if (!split_entity(part_text, e)) {
                    e.headers.clear();
                    e.body = part_text;
                }
                if (auto child = walk(e.headers, e.body, depth + 1)) node.children.push_back(std::move(*child));
            }
            return node;
        }

        ContentType disposition;
        if (const auto* h = find(headers, "Content-Disposition")) disposition = parse_content_type(h->raw_value);
        std::string filename;
        if (auto it = disposition.params.find("filename"); it != disposition.params.end()) {
            filename = it->second;
        } else if (auto nit = ct.params.find("name"); nit != ct.params.end()) {
            filename = nit->second;
        }
        const bool is_attachment = disposition.media_type == "attachment" || !filename.empty() ||
                                   !ct.media_type.starts_with("text/");
        if (is_attachment) {
            attachments.push_back({decode_header_value(repair_utf8(filename)), ct.media_type});
            return std::nullopt;
        }

        BodyPart leaf;
        leaf.media_type = ct.media_type;
        leaf.transfer_encoding = cte;
        if (auto it = ct.params.find("charset"); it != ct.params.end()) leaf.charset = to_lower(it->second);
        leaf.content = to_utf8(decode_transfer(body, cte), leaf.charset);
        return leaf;
    }

    static std::optional<std::vector<std::string_view>> split_multipart(std::string_view body,
                                                                        const std::string& boundary) {
        const std::string delim = "--" + boundary;
        std::vector<std::string_view> parts;
        size_t pos = 0;
        size_t part_start = std::string_view::npos;
        bool found = false;
        while (pos <= body.size()) {
            size_t eol = body.find('\n', pos);
            if (eol == std::string_view::npos) eol = body.size();
            std::string_view line = body.substr(pos, eol - pos);
            if (line.starts_with(delim)) {
                std::string_view rest = line.substr(delim.size());
                const bool closing = rest.starts_with("--");
                if (closing) rest.remove_prefix(2);
                if (trim(rest).empty()) {
                    found = true;
                    if (part_start != std::string_view::npos) {
                        // the newline before the delimiter belongs to the delimiter
                        size_t end = pos > part_start ? pos - 1 : part_start;
                        parts.push_back(body.substr(part_start, end - part_start));
                    }
                    if (closing) return parts;
                    part_start = std::min(eol + 1, body.size());
                }
            }
            if (eol == body.size()) break;
            pos = eol + 1;
        }
        if (!found) return std::nullopt;
        if (part_start != std::string_view::npos && part_start < body.size()) {
            parts.push_back(body.substr(part_start));  // unterminated final part
        }
        return parts;
    }
};

struct EncodedWord {
    size_t end;  // one past "?="
    std::string_view charset;
    char encoding;
    std::string_view text;
};

// Matches =?charset?X?text?= starting at `pos` (which points at "=?").
std::optional<EncodedWord> match_encoded_word(std::string_view s, size_t pos) {
    size_t q1 = s.find('?', pos + 2);
    if (q1 == std::string_view::npos || q1 == pos + 2) return std::nullopt;
    std::string_view charset = s.substr(pos + 2, q1 - pos - 2);
    for (char c : charset) {
        if (is_fws(c) || c == '=') return std::nullopt;
    }
    if (q1 + 2 >= s.size() || s[q1 + 2] != '?') return std::nullopt;
    char enc = s[q1 + 1];
    if (enc != 'B' && enc != 'b' && enc != 'Q' && enc != 'q') return std::nullopt;
    size_t text_start = q1 + 3;
    size_t q2 = s.find('?', text_start);
    if (q2 == std::string_view::npos || q2 + 1 >= s.size() || s[q2 + 1] != '=') return std::nullopt;
    std::string_view text = s.substr(text_start, q2 - text_start);
    for (char c : text) {
        if (is_fws(c)) return std::nullopt;
    }
    return EncodedWord{q2 + 2, charset, static_cast<char>(enc & ~0x20), text};
}

} // namespace

std::string decode_header_value(std::string_view raw) {
    if (raw.find("=?") == std::string_view::npos) return std::string(raw);

    std::string out;
    std::string pending;  // undecoded bytes of adjacent same-charset words
    std::string pending_charset;
    auto flush = [&] {
        if (!pending_charset.empty() || !pending.empty()) out += to_utf8(pending, pending_charset);
        pending.clear();
        pending_charset.clear();
    };

    size_t pos = 0;
    size_t literal_start = 0;
    bool last_was_word = false;
    while (pos < raw.size()) {
        size_t at = raw.find("=?", pos);
        if (at == std::string_view::npos) break;
        auto word = match_encoded_word(raw, at);
        if (!word) {
            pos = at + 2;
            continue;
        }
        std::string_view gap = raw.substr(literal_start, at - literal_start);
        const bool gap_is_space = trim(gap).empty();
        if (!(last_was_word && gap_is_space)) {
            flush();
            out.append(gap);
        }
        auto bytes = word->encoding == 'B' ? base64_decode_strict(word->text) : q_decode(word->text);
        if (!bytes) return std::string(raw);
        std::string cs = to_lower(word->charset);
        if (cs != pending_charset) flush();
        pending_charset = cs;
        pending += *bytes;
        last_was_word = true;
        pos = literal_start = word->end;
    }
    flush();
    out.append(raw.substr(literal_start));
    return out;
}

ContentType parse_content_type(std::string_view value) {
    ContentType ct;
    auto pieces = split_params(value);
    ct.media_type = to_lower(trim(pieces.front()));

    struct Segment {
        std::string value;
        bool extended;
    };
    std::map<std::string, std::map<int, Segment>> continued;

    for (size_t i = 1; i < pieces.size(); ++i) {
        auto piece = pieces[i];
        auto eq = piece.find('=');
        if (eq == std::string_view::npos) continue;
        std::string name = to_lower(trim(piece.substr(0, eq)));
        std::string val = unquote(piece.substr(eq + 1));
        if (name.empty()) continue;

        bool extended = false;
        if (name.back() == '*') {
            extended = true;
            name.pop_back();
        }
        int index = -1;
        if (auto star = name.rfind('*'); star != std::string::npos) {
            std::string_view digits = std::string_view(name).substr(star + 1);
            int n = 0;
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
            if (ec == std::errc() && p == digits.data() + digits.size()) {
                index = n;
                name.resize(star);
            }
        }
        if (index < 0 && !extended) {
            ct.params[name] = val;
        } else {
            continued[name][std::max(index, 0)] = Segment{val, extended};
        }
    }

    for (auto& [name, segs] : continued) {
        std::string charset;
        std::string bytes;
        bool first = true;
        for (auto& [idx, seg] : segs) {
            std::string_view v = seg.value;
            if (seg.extended && first) {
                // charset'language'value
                auto a = v.find('\'');
                auto b = a == std::string_view::npos ? a : v.find('\'', a + 1);
                if (b != std::string_view::npos) {
                    charset = std::string(v.substr(0, a));
                    v = v.substr(b + 1);
                }
            }
            bytes += seg.extended ? percent_decode(v) : std::string(v);
            first = false;
        }
        ct.params[name] = to_utf8(bytes, charset);
    }
    return ct;
}

ParsedEmail parse_eml(const RawEmail& raw) {
    if (raw.bytes.empty()) throw MalformedMessage("empty message");
    const std::string text = normalize_newlines(raw.bytes);
    std::string_view view = text;
    // mbox separator line
    if (view.starts_with("From ")) {
        auto eol = view.find('\n');
        view = eol == std::string_view::npos ? std::string_view{} : view.substr(eol + 1);
    }

    Entity top;
    if (!split_entity(view, top)) throw MalformedMessage("no header section found");

    ParsedEmail email;
    email.headers = std::move(top.headers);
    Walker walker{email.attachments};
    if (auto body = walker.walk(email.headers, top.body, 0)) {
        email.body = std::move(*body);
    } else {
        email.body = BodyPart{};
    }
    return email;
}

namespace {
void collect_leaves(const BodyPart& part, std::vector<BodyPart>& out) {
    if (part.is_multipart()) {
        for (const auto& child : part.children) collect_leaves(child, out);
    } else {
        out.push_back(part);
    }
}
} // namespace

std::vector<BodyPart> flatten_body_parts(const ParsedEmail& email) {
    std::vector<BodyPart> out;
    collect_leaves(email.body, out);
    return out;
}

} // namespace phishscope
