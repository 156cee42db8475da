#include "phishscope/simplifier.hpp"

#include "phishscope/errors.hpp"
#include "phishscope/html.hpp"
#include "phishscope/mime.hpp"

#include <algorithm>
#include <climits>
#include <numeric>

namespace phishscope {

std::string_view to_string(BodyKind kind) { return kind == BodyKind::html ? "html" : "plain"; }

std::string render_header_block(const ParsedEmail& email) {
    std::string out;
    for (const auto& h : email.headers) {
        out += h.name;
        out += ": ";
        out += h.value;
        out += '\n';
    }
    for (const auto& a : email.attachments) {
        out += "Attachment: ";
        out += a.filename.empty() ? "(unnamed)" : a.filename;
        out += " (";
        out += a.declared_media_type;
        out += ")\n";
    }
    return out;
}

std::string render_full_body(const std::vector<BodyPart>& leaves) {
    std::string out;
    for (size_t i = 0; i < leaves.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += leaves[i].content;
    }
    return out;
}

const BodyPart& select_preferred_part(const std::vector<BodyPart>& parts) {
    if (parts.empty()) throw NoBody();
    for (const auto& p : parts) {
        if (p.is_html()) return p;
    }
    for (const auto& p : parts) {
        if (p.is_plain()) return p;
    }
    return parts.front();
}

namespace {

// Byte length of the first `n` UTF-8 code points of `s`.
size_t utf8_prefix_bytes(std::string_view s, size_t n) {
    size_t i = 0;
    while (i < s.size() && n > 0) {
        ++i;
        while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
        --n;
    }
    return i;
}

bool is_scheme_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '+' || c == '-' ||
           c == '.';
}

} // namespace

std::string truncate_url(std::string_view url, std::size_t keep) {
    size_t authority_end = 0;
    size_t colon = url.find(':');
    bool has_scheme = colon != std::string_view::npos && colon > 0 &&
                      ((url[0] >= 'a' && url[0] <= 'z') || (url[0] >= 'A' && url[0] <= 'Z')) &&
                      std::all_of(url.begin(), url.begin() + static_cast<std::ptrdiff_t>(colon), is_scheme_char);
    size_t after_scheme = has_scheme ? colon + 1 : 0;
    if (url.substr(after_scheme, 2) == "//") {
        size_t end = url.find_first_of("/?#", after_scheme + 2);
        authority_end = end == std::string_view::npos ? url.size() : end;
    } else {
        authority_end = after_scheme;
    }
    std::string_view rest = url.substr(authority_end);
    size_t lead = (!rest.empty() && rest.front() == '/') ? 1 : 0;
    size_t cut = lead + utf8_prefix_bytes(rest.substr(lead), keep);
    return std::string(url.substr(0, authority_end)) + std::string(rest.substr(0, cut));
}

namespace {

using html::Node;

void remove_comments_and_scripts(Node& n) {
    std::erase_if(n.children, [](const Node& c) {
        return c.kind == Node::Kind::comment || c.is_element("style") || c.is_element("script");
    });
    for (auto& c : n.children) remove_comments_and_scripts(c);
}

void filter_attributes(Node& n, const std::vector<std::string>& keep) {
    if (n.is_element()) {
        std::erase_if(n.attributes, [&](const html::Attribute& a) {
            return std::find(keep.begin(), keep.end(), a.name) == keep.end();
        });
    }
    for (auto& c : n.children) filter_attributes(c, keep);
}

struct Content {
    bool text = false;
    bool link = false;
};

// Drops elements whose subtree has neither visible text nor a src/href.
Content remove_empty(Node& n) {
    Content here;
    if (n.kind == Node::Kind::text) {
        here.text = html::has_visible_text(n.text);
        return here;
    }
    if (n.is_element() && (n.attribute("src") || n.attribute("href"))) here.link = true;
    std::vector<Node> kept;
    kept.reserve(n.children.size());
    for (auto& c : n.children) {
        if (c.kind == Node::Kind::doctype) continue;
        Content sub = remove_empty(c);
        if (c.kind != Node::Kind::text && !sub.text && !sub.link) continue;
        here.text |= sub.text;
        here.link |= sub.link;
        kept.push_back(std::move(c));
    }
    n.children = std::move(kept);
    return here;
}

bool is_unwrapped(const Node& n) { return n.is_element("font") || n.is_element("strong") || n.is_element("b"); }

void unwrap(Node& n) {
    for (auto& c : n.children) unwrap(c);
    if (std::none_of(n.children.begin(), n.children.end(), is_unwrapped)) return;
    std::vector<Node> flat;
    for (auto& c : n.children) {
        if (is_unwrapped(c)) {
            for (auto& g : c.children) flat.push_back(std::move(g));
        } else {
            flat.push_back(std::move(c));
        }
    }
    n.children = std::move(flat);
}

void shorten_urls(Node& n, size_t keep) {
    if (n.is_element("img")) {
        if (auto* a = n.attribute("src")) a->value = truncate_url(a->value, keep);
    } else if (n.is_element("a")) {
        if (auto* a = n.attribute("href")) a->value = truncate_url(a->value, keep);
    }
    for (auto& c : n.children) shorten_urls(c, keep);
}

// Flattened document: serialization pieces in document order, each owned by
// a node identified by its post-order index. A node's subtree occupies the
// contiguous post-order range [idx - size + 1, idx].
struct FlatDocument {
    std::vector<std::string> pieces;
    std::vector<int> piece_owner;
    std::vector<int> subtree_size;

    int add(const Node& n, int& counter) {
        const int first = counter;
        if (n.kind != Node::Kind::element) {
            std::string s = html::serialize(n);
            pieces.push_back(std::move(s));
            piece_owner.push_back(counter);
            subtree_size.push_back(1);
            return counter++;
        }
        Node shell = n;
        shell.children.clear();
        std::string whole = html::serialize(shell);
        std::string close;
        if (!html::is_void_element(n.name)) {
            close = "</" + n.name + ">";
            whole.resize(whole.size() - close.size());
        }
        size_t open_piece = pieces.size();
        pieces.push_back(std::move(whole));
        piece_owner.push_back(-1);
        for (const auto& c : n.children) add(c, counter);
        size_t close_piece = pieces.size();
        if (!close.empty()) {
            pieces.push_back(std::move(close));
            piece_owner.push_back(-1);
        }
        const int idx = counter++;
        subtree_size.push_back(idx - first + 1);
        piece_owner[open_piece] = idx;
        if (close_piece < pieces.size()) piece_owner[close_piece] = idx;
        return idx;
    }
};

class Fenwick {
public:
    explicit Fenwick(size_t n) : tree_(n + 1, 0) {
        for (size_t i = 1; i <= n; ++i) {
            tree_[i] += 1;
            size_t parent = i + (i & (~i + 1));
            if (parent <= n) tree_[parent] += tree_[i];
        }
    }
    void remove(size_t i) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) --tree_[i];
    }
    // position of the alive element with 0-based rank `k`
    size_t find_by_rank(int k) const {
        size_t pos = 0;
        size_t step = 1;
        while (step * 2 < tree_.size()) step *= 2;
        for (; step > 0; step /= 2) {
            if (pos + step < tree_.size() && tree_[pos + step] <= k) {
                pos += step;
                k -= tree_[pos];
            }
        }
        return pos;
    }

private:
    std::vector<int> tree_;
};

// Step at which each post-order node is removed under the middle-removal rule.
std::vector<int> center_removal_schedule(const std::vector<int>& subtree_size, int& total_steps) {
    const size_t n = subtree_size.size();
    std::vector<int> removed_at(n, INT_MAX);
    std::vector<size_t> next_alive(n + 1);
    std::iota(next_alive.begin(), next_alive.end(), 0);
    auto find_next = [&](size_t i) {
        size_t root = i;
        while (next_alive[root] != root) root = next_alive[root];
        while (next_alive[i] != root) {
            size_t up = next_alive[i];
            next_alive[i] = root;
            i = up;
        }
        return root;
    };
    Fenwick alive_index(n);
    size_t alive = n;
    int step = 0;
    while (alive > 0) {
        ++step;
        size_t target = alive_index.find_by_rank(static_cast<int>(alive / 2));
        size_t lo = target + 1 - static_cast<size_t>(subtree_size[target]);
        for (size_t i = find_next(lo); i <= target; i = find_next(i)) {
            removed_at[i] = step;
            alive_index.remove(i);
            next_alive[i] = i + 1;
            --alive;
        }
    }
    total_steps = step;
    return removed_at;
}

// Smallest k in [lo, hi] with fits(k), assuming fits is monotone and fits(hi).
template <typename Pred>
int first_fitting(int lo, int hi, Pred fits) {
    while (lo < hi) {
        int mid = lo + (hi - lo) / 2;
        if (fits(mid)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

} // namespace

std::string prune_html(std::string_view input, const PruneOptions& options) {
    Node doc = html::parse(input);
    remove_comments_and_scripts(doc);
    filter_attributes(doc, options.keep_attributes);
    remove_empty(doc);
    unwrap(doc);
    shorten_urls(doc, options.url_remainder_chars);
    return html::serialize(doc);
}

std::string trim_html_center(std::string_view input, const TokenizerId& tokenizer, const TokenBudget& budget,
                             std::string_view prefix, const TokenizerRegistry& registry) {
    auto fits = [&](std::string_view body) {
        std::string text(prefix);
        text += body;
        return registry.count(text, tokenizer) <= budget.limit;
    };
    if (fits(input)) return std::string(input);
    if (!fits({})) throw BudgetUnreachable("header block alone exceeds the token budget");

    Node doc = html::parse(input);
    FlatDocument flat;
    int counter = 0;
    for (const auto& c : doc.children) flat.add(c, counter);
    int total_steps = 0;
    const auto removed_at = center_removal_schedule(flat.subtree_size, total_steps);
    if (total_steps == 0) return {};

    auto render = [&](int k) {
        std::string out;
        for (size_t i = 0; i < flat.pieces.size(); ++i) {
            if (removed_at[static_cast<size_t>(flat.piece_owner[i])] > k) out += flat.pieces[i];
        }
        return out;
    };
    int k = first_fitting(1, total_steps, [&](int step) { return fits(render(step)); });
    return render(k);
}

std::string trim_plain_middle(std::string_view text, const TokenizerId& tokenizer, const TokenBudget& budget,
                              std::string_view prefix, std::string_view marker,
                              const TokenizerRegistry& registry) {
    auto fits = [&](std::string_view body) {
        std::string full(prefix);
        full += body;
        return registry.count(full, tokenizer) <= budget.limit;
    };
    if (fits(text)) return std::string(text);
    if (!fits({})) throw BudgetUnreachable("header block alone exceeds the token budget");

    std::vector<std::string_view> lines;
    size_t pos = 0;
    while (true) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    const int n = static_cast<int>(lines.size());

    // After k middle removals the survivors are the first ceil(s/2) and the
    // last floor(s/2) lines, s = n - k.
    auto render = [&](int k) {
        const int s = n - k;
        const int head = (s + 1) / 2;
        const int tail = s / 2;
        std::string out;
        for (int i = 0; i < head; ++i) {
            out.append(lines[static_cast<size_t>(i)]);
            out.push_back('\n');
        }
        out.append(marker);
        for (int i = n - tail; i < n; ++i) {
            out.push_back('\n');
            out.append(lines[static_cast<size_t>(i)]);
        }
        return out;
    };
    if (!fits(render(n))) return {};
    return render(first_fitting(1, n, [&](int k) { return fits(render(k)); }));
}

SimplifiedEmail simplify(const ParsedEmail& email, const TokenizerId& tokenizer, const TokenBudget& budget,
                         const SimplifyOptions& options) {
    const auto& registry = *options.tokenizers;
    SimplifiedEmail out;
    out.header_block = render_header_block(email);
    const std::string prefix = out.header_block + "\n";
    auto fits = [&](std::string_view body) {
        return registry.count(prefix + std::string(body), tokenizer) <= budget.limit;
    };

    const auto leaves = flatten_body_parts(email);
    const bool any_html = std::any_of(leaves.begin(), leaves.end(), [](const BodyPart& p) { return p.is_html(); });
    out.body_kind = any_html ? BodyKind::html : BodyKind::plain;
    out.body_text = render_full_body(leaves);
    if (fits(out.body_text)) return out;
    if (leaves.empty()) throw BudgetUnreachable("header block alone exceeds the token budget");

    const BodyPart& part = select_preferred_part(leaves);
    out.reduction_log.emplace_back(steps::organize_multipart);
    out.body_text = part.content;
    out.body_kind = part.is_html() ? BodyKind::html : BodyKind::plain;
    if (fits(out.body_text)) return out;

    if (out.body_kind == BodyKind::html) {
        out.reduction_log.emplace_back(steps::prune_html);
        out.body_text = prune_html(out.body_text, options.prune);
        if (fits(out.body_text)) return out;
        out.reduction_log.emplace_back(steps::trim_html_center);
        out.body_text = trim_html_center(out.body_text, tokenizer, budget, prefix, registry);
    } else {
        out.reduction_log.emplace_back(steps::trim_plain_middle);
        out.body_text = trim_plain_middle(out.body_text, tokenizer, budget, prefix, options.elision_marker, registry);
    }
    return out;
}

} // namespace phishscope
