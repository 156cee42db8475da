#pragma once
// Random inputs shared by the property tests and the acceptance runner.

#include "phishscope/email.hpp"
#include "phishscope/verdict.hpp"

#include <random>
#include <string>
#include <vector>

namespace testgen {

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

inline const std::vector<std::string>& words() {
    static const std::vector<std::string> w = {
        "account", "invoice", "meeting", "password", "delivery", "update", "bank", "team", "schedule",
        "report", "é", "ça", "日本", "notice", "link", "please", "review", "thanks", "the", "a", "your",
        "security", "payment", "order", "today", "Привет", "👍", "offer", "customer", "support"};
    return w;
}

inline std::string sentence(Rng& rng, std::size_t n_words) {
    std::string out;
    for (std::size_t i = 0; i < n_words; ++i) {
        if (i) out += ' ';
        out += words()[uniform(rng, 0, words().size() - 1)];
    }
    return out;
}

inline std::string random_url(Rng& rng) {
    static const std::vector<std::string> hosts = {"example.com", "login.bank.example", "cdn.example.net:8443",
                                                   "xn--pypal-4ve.example", "198.51.100.23"};
    std::string url = chance(rng, 0.5) ? "https://" : "http://";
    url += hosts[uniform(rng, 0, hosts.size() - 1)];
    const std::size_t segments = uniform(rng, 0, 4);
    for (std::size_t i = 0; i < segments; ++i) url += "/" + std::to_string(rng() % 100000) + "abc";
    if (chance(rng, 0.5)) url += "?session=" + std::to_string(rng()) + "&ref=mail";
    if (chance(rng, 0.2)) url += "#frag";
    return url;
}

inline std::string random_html(Rng& rng, std::size_t target_bytes) {
    static const std::vector<std::string> tags = {"div", "p", "span", "table", "td", "ul", "li", "h1",
                                                  "em", "b", "font", "strong", "section", "center"};
    std::string out = chance(rng, 0.5) ? "<!DOCTYPE html>\n<html><head><style>p{margin:0}</style></head><body>"
                                       : "<html><body>";
    std::vector<std::string> open;
    while (out.size() < target_bytes) {
        const std::size_t pick = uniform(rng, 0, 9);
        if (pick <= 2 && open.size() < 8) {
            const std::string& t = tags[uniform(rng, 0, tags.size() - 1)];
            out += "<" + t;
            if (chance(rng, 0.4)) out += " style=\"color:#" + std::to_string(rng() % 999) + "\"";
            if (chance(rng, 0.3)) out += " class=\"c" + std::to_string(rng() % 50) + "\"";
            out += ">";
            open.push_back(t);
        } else if (pick == 3 && !open.empty()) {
            out += "</" + open.back() + ">";
            open.pop_back();
        } else if (pick == 4) {
            out += "<a href=\"" + random_url(rng) + "\" onclick=\"track()\">" + sentence(rng, uniform(rng, 1, 4)) +
                   "</a>";
        } else if (pick == 5) {
            out += "<img src=\"" + random_url(rng) + "\" width=\"1\" alt=\"" + sentence(rng, 1) + "\">";
        } else if (pick == 6) {
            out += chance(rng, 0.5) ? "<!-- " + sentence(rng, 3) + " -->" : "<script>var x = '" + sentence(rng, 2) + "';</script>";
        } else {
            out += sentence(rng, uniform(rng, 1, 40));
            if (chance(rng, 0.3)) out += "\n";
        }
    }
    while (!open.empty()) {
        out += "</" + open.back() + ">";
        open.pop_back();
    }
    out += "</body></html>";
    return out;
}

inline std::string random_plain(Rng& rng, std::size_t target_bytes) {
    std::string out;
    while (out.size() < target_bytes) {
        // occasionally one very long line
        out += sentence(rng, chance(rng, 0.02) ? uniform(rng, 200, 2000) : uniform(rng, 0, 14));
        out += '\n';
    }
    return out;
}

inline std::string base64(std::string_view in) {
    static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    std::size_t line = 0;
    for (std::size_t i = 0; i < in.size(); i += 3) {
        unsigned v = static_cast<unsigned char>(in[i]) << 16;
        if (i + 1 < in.size()) v |= static_cast<unsigned char>(in[i + 1]) << 8;
        if (i + 2 < in.size()) v |= static_cast<unsigned char>(in[i + 2]);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += i + 1 < in.size() ? tbl[(v >> 6) & 63] : '=';
        out += i + 2 < in.size() ? tbl[v & 63] : '=';
        if ((line += 4) >= 76) {
            out += '\n';
            line = 0;
        }
    }
    return out;
}

inline std::string leaf(Rng& rng, const std::string& type, const std::string& content) {
    if (chance(rng, 0.4)) {
        return "Content-Type: " + type + "; charset=utf-8\nContent-Transfer-Encoding: base64\n\n" + base64(content) +
               "\n";
    }
    return "Content-Type: " + type + "; charset=utf-8\n\n" + content + "\n";
}

/// A random message with body up to `max_body` bytes: html, plain,
/// multipart/alternative or multipart/mixed with an attachment.
inline phishscope::RawEmail random_email(Rng& rng, std::size_t max_body = 200 * 1024) {
    std::string headers;
    headers += "Received: from relay" + std::to_string(rng() % 100) + ".example.net\n\tby mx.example.org; " +
               sentence(rng, 3) + "\n";
    headers += "From: \"" + sentence(rng, 2) + "\" <sender" + std::to_string(rng() % 100) + "@example.net>\n";
    headers += "To: alice@corp.example";
    if (chance(rng, 0.5)) headers += ", Bob <bob@corp.example>";
    headers += "\n";
    if (chance(rng, 0.3)) headers += "Cc: carol@corp.example\n";
    headers += "Subject: " + std::string(chance(rng, 0.3) ? "=?UTF-8?B?U2VjdXJpdHkgQWxlcnQh?=" : sentence(rng, 5)) +
               "\n";
    headers += "Date: Mon, 01 Apr 2024 09:00:00 +0000\n";
    if (chance(rng, 0.5)) headers += "X-Spam-Status: No, score=" + std::to_string(rng() % 10) + "\n";
    if (chance(rng, 0.5)) headers += "DKIM-Signature: v=1; a=rsa-sha256; b=" + base64(sentence(rng, 20)) + "\n";
    headers += "MIME-Version: 1.0\n";

    const std::size_t size = uniform(rng, 0, max_body);
    std::string msg;
    switch (uniform(rng, 0, 3)) {
    case 0:
        msg = headers + leaf(rng, "text/html", random_html(rng, size));
        break;
    case 1:
        msg = headers + leaf(rng, "text/plain", random_plain(rng, size));
        break;
    case 2:
        msg = headers + "Content-Type: multipart/alternative; boundary=\"=_alt\"\n\n--=_alt\n" +
              leaf(rng, "text/plain", random_plain(rng, size / 2)) + "--=_alt\n" +
              leaf(rng, "text/html", random_html(rng, size / 2)) + "--=_alt--\n";
        break;
    default:
        msg = headers + "Content-Type: multipart/mixed; boundary=\"=_mix\"\n\n--=_mix\n" +
              leaf(rng, chance(rng, 0.5) ? "text/html" : "text/plain",
                   chance(rng, 0.5) ? random_html(rng, size) : random_plain(rng, size)) +
              "--=_mix\nContent-Type: application/pdf; name=\"doc.pdf\"\nContent-Transfer-Encoding: base64\n\n" +
              base64(sentence(rng, 30)) + "\n--=_mix--\n";
        break;
    }
    if (chance(rng, 0.5)) {
        std::string crlf;
        for (char c : msg) {
            if (c == '\n') crlf += '\r';
            crlf += c;
        }
        msg.swap(crlf);
    }
    return {msg, std::nullopt};
}

inline std::string random_text(Rng& rng, std::size_t max_len, bool with_specials = true) {
    static const std::vector<std::string> pieces = {"a", "b", "Z", " ", "\n", "\t", "\"", "\\", "/", "é", "日",
                                                    "😀", "{", "}", "'", ",", ":", "0", "\x01", "</script>"};
    std::string out;
    const std::size_t n = uniform(rng, 0, max_len);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = pieces[uniform(rng, 0, with_specials ? pieces.size() - 1 : 3)];
        out += p;
    }
    return out;
}

/// A valid verdict: score within range, rationales within the word limit.
inline phishscope::DetectionVerdict random_verdict(Rng& rng, bool full = true) {
    phishscope::DetectionVerdict v;
    v.is_phishing = chance(rng, 0.5);
    if (!full) return v;
    if (chance(rng, 0.9)) v.phishing_score = static_cast<int>(uniform(rng, 0, 10));
    if (chance(rng, 0.7)) v.brand_impersonated = random_text(rng, 12);
    if (chance(rng, 0.8)) v.rationales = random_text(rng, 300);
    if (chance(rng, 0.8)) v.brief_reason = random_text(rng, 40);
    return v;
}

/// Prose fragment without braces or the key name, so it cannot be mistaken
/// for the verdict object.
inline std::string random_prose(Rng& rng) {
    static const std::vector<std::string> bits = {
        "Sure!", "Here is my analysis.", "The sender domain looks odd.", "Let me explain:", "Result:",
        "I hope this helps.", "Note: scores are approximate.", "```", "```json", "\n", "\n\n", "---", "**Answer**",
        "The email is fine (or not).", "It's hard to say; [see below].", "\"quoted\" words", "'single'",
        "phishing", "legitimate", "is not phishing", "looks like phishing"};
    std::string out;
    const std::size_t n = uniform(rng, 0, 6);
    for (std::size_t i = 0; i < n; ++i) {
        out += bits[uniform(rng, 0, bits.size() - 1)];
        out += chance(rng, 0.5) ? " " : "\n";
    }
    return out;
}

} // namespace testgen
