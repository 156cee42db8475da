#include "phishscope/headers.hpp"

#include <algorithm>
#include <stdexcept>

namespace phishscope {

const std::vector<std::string>& mandatory_header_denylist() {
    static const std::vector<std::string> patterns = {"X-*", "DKIM-Signature", "ARC-*"};
    return patterns;
}

const std::vector<std::string>& protected_headers() {
    static const std::vector<std::string> names = {
        "From",       "To",       "Cc",       "Reply-To",
        "Return-Path", "Subject", "Date",     "Message-ID",
        "Received",   "Authentication-Results", "Content-Type",
    };
    return names;
}

bool glob_match(std::string_view pattern, std::string_view name) {
    auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; };
    size_t p = 0, n = 0;
    size_t star = std::string_view::npos, resume = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || lower(pattern[p]) == lower(name[n]))) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            resume = n;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            n = ++resume;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

namespace {

bool is_protected(std::string_view name) {
    const auto& names = protected_headers();
    return std::any_of(names.begin(), names.end(), [&](const std::string& n) { return iequals(n, name); });
}

bool matches_any(const std::vector<std::string>& patterns, std::string_view name) {
    return std::any_of(patterns.begin(), patterns.end(), [&](const std::string& p) { return glob_match(p, name); });
}

bool is_recipient_header(std::string_view name) {
    return iequals(name, "To") || iequals(name, "Cc") || iequals(name, "Delivered-To");
}

bool is_addr_char(char c) {
    auto u = static_cast<unsigned char>(c);
    if (u <= 32 || u == 127) return false;
    switch (c) {
    case '<': case '>': case ',': case ';': case ':': case '"': case '(': case ')':
    case '[': case ']': case '\\':
        return false;
    default:
        return true;
    }
}

// Case-insensitive replace of every occurrence of `needle`.
std::string replace_all_icase(std::string_view hay, std::string_view needle, std::string_view with) {
    if (needle.empty()) return std::string(hay);
    std::string lower_hay = to_lower(hay);
    std::string lower_needle = to_lower(needle);
    std::string out;
    size_t pos = 0;
    while (true) {
        size_t at = lower_hay.find(lower_needle, pos);
        if (at == std::string::npos) break;
        out.append(hay.substr(pos, at - pos));
        out.append(with);
        pos = at + needle.size();
    }
    out.append(hay.substr(pos));
    return out;
}

} // namespace

ParsedEmail sanitize_headers(ParsedEmail email, const std::vector<std::string>& extra_denylist) {
    std::erase_if(email.headers, [&](const HeaderField& h) {
        if (is_protected(h.name)) return false;
        return matches_any(mandatory_header_denylist(), h.name) || matches_any(extra_denylist, h.name);
    });
    return email;
}

std::vector<std::string> extract_addresses(std::string_view value) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < value.size()) {
        size_t at = value.find('@', i);
        if (at == std::string_view::npos) break;
        size_t start = at;
        while (start > 0 && is_addr_char(value[start - 1])) --start;
        size_t end = at + 1;
        while (end < value.size() && is_addr_char(value[end])) ++end;
        if (start < at && end > at + 1) out.emplace_back(value.substr(start, end - start));
        i = end;
    }
    return out;
}

bool is_valid_address(std::string_view addr) {
    auto at = addr.find('@');
    if (at == std::string_view::npos || at == 0 || at + 1 >= addr.size()) return false;
    if (addr.find('@', at + 1) != std::string_view::npos) return false;
    return std::all_of(addr.begin(), addr.end(), is_addr_char);
}

ParsedEmail anonymize_recipients(ParsedEmail email, std::string_view dummy) {
    if (!is_valid_address(dummy)) throw std::invalid_argument("dummy address is not a valid addr-spec: " + std::string(dummy));

    std::vector<std::string> originals;
    for (auto& h : email.headers) {
        if (!is_recipient_header(h.name)) continue;
        for (auto& a : extract_addresses(h.value)) originals.push_back(std::move(a));
        for (auto& a : extract_addresses(h.raw_value)) originals.push_back(std::move(a));
        h.value = h.raw_value = std::string(dummy);
    }
    if (originals.empty()) return email;

    // longest first so that a.b@x is replaced before b@x
    std::sort(originals.begin(), originals.end(),
              [](const std::string& a, const std::string& b) {
                  return a.size() != b.size() ? a.size() > b.size() : a < b;
              });
    originals.erase(std::unique(originals.begin(), originals.end()), originals.end());
    for (auto& h : email.headers) {
        if (is_recipient_header(h.name)) continue;
        for (const auto& addr : originals) {
            if (iequals(addr, dummy)) continue;
            h.value = replace_all_icase(h.value, addr, dummy);
            h.raw_value = replace_all_icase(h.raw_value, addr, dummy);
        }
    }
    return email;
}

} // namespace phishscope
