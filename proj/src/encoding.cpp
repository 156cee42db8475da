#include "phishscope/encoding.hpp"

#include "phishscope/email.hpp"

#include <array>
#include <cerrno>
#include <iconv.h>

namespace phishscope {

namespace {

constexpr std::string_view kReplacement = "\xEF\xBF\xBD";

constexpr std::array<int8_t, 256> make_b64_table() {
    std::array<int8_t, 256> t{};
    for (auto& v : t) v = -1;
    constexpr std::string_view alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (size_t i = 0; i < alphabet.size(); ++i) t[static_cast<unsigned char>(alphabet[i])] = static_cast<int8_t>(i);
    return t;
}

constexpr auto kB64 = make_b64_table();

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

// Accumulates sextets into bytes.
struct SextetSink {
    std::string out;
    uint32_t acc = 0;
    int bits = 0;
    void push(int v) {
        acc = (acc << 6) | static_cast<uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xFF));
        }
    }
};

std::string normalize_charset(std::string_view charset) {
    std::string cs;
    for (char c : charset) {
        if (c == '"' || c == '\'' || is_space(c)) continue;
        cs.push_back(c);
    }
    // RFC 2231 language suffix
    if (auto star = cs.find('*'); star != std::string::npos) cs.resize(star);
    return to_lower(cs);
}

bool is_utf8_alias(std::string_view cs) {
    return cs.empty() || cs == "utf-8" || cs == "utf8" || cs == "us-ascii" || cs == "ascii" ||
           cs == "unicode-1-1-utf-8";
}

} // namespace

std::optional<std::string> base64_decode_strict(std::string_view in) {
    SextetSink sink;
    size_t data = 0;
    size_t padding = 0;
    for (char c : in) {
        if (is_space(c)) continue;
        if (c == '=') {
            ++padding;
            continue;
        }
        if (padding > 0) return std::nullopt;
        int v = kB64[static_cast<unsigned char>(c)];
        if (v < 0) return std::nullopt;
        sink.push(v);
        ++data;
    }
    const size_t rem = data % 4;
    if (rem == 1) return std::nullopt;
    if (padding > 0 && (rem == 0 || padding != 4 - rem)) return std::nullopt;
    return std::move(sink.out);
}

std::string base64_decode_lenient(std::string_view in) {
    SextetSink sink;
    sink.out.reserve(in.size() * 3 / 4);
    for (char c : in) {
        int v = kB64[static_cast<unsigned char>(c)];
        if (v >= 0) sink.push(v);
    }
    return std::move(sink.out);
}

std::string quoted_printable_decode(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    for (size_t i = 0; i < in.size(); ++i) {
        char c = in[i];
        if (c != '=') {
            out.push_back(c);
            continue;
        }
        // soft line break, possibly with trailing whitespace before the newline
        size_t j = i + 1;
        while (j < in.size() && (in[j] == ' ' || in[j] == '\t')) ++j;
        if (j < in.size() && (in[j] == '\n' || in[j] == '\r')) {
            if (in[j] == '\r' && j + 1 < in.size() && in[j + 1] == '\n') ++j;
            i = j;
            continue;
        }
        if (j == in.size()) {
            i = j;
            continue;
        }
        if (i + 2 < in.size()) {
            int hi = hex_value(in[i + 1]);
            int lo = hex_value(in[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out.push_back(static_cast<char>(hi * 16 + lo));
                i += 2;
                continue;
            }
        }
        out.push_back(c);
    }
    return out;
}

std::optional<std::string> q_decode(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    for (size_t i = 0; i < in.size(); ++i) {
        char c = in[i];
        if (c == '_') {
            out.push_back(' ');
        } else if (c == '=') {
            if (i + 2 >= in.size()) return std::nullopt;
            int hi = hex_value(in[i + 1]);
            int lo = hex_value(in[i + 2]);
            if (hi < 0 || lo < 0) return std::nullopt;
            out.push_back(static_cast<char>(hi * 16 + lo));
            i += 2;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

bool is_valid_utf8(std::string_view bytes) {
    return repair_utf8(bytes) == bytes;
}

std::string repair_utf8(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    const size_t n = s.size();
    size_t i = 0;
    while (i < n) {
        unsigned char b = p[i];
        if (b < 0x80) {
            out.push_back(static_cast<char>(b));
            ++i;
            continue;
        }
        int need = 0;
        unsigned char lo = 0x80, hi = 0xBF;
        if (b >= 0xC2 && b <= 0xDF) {
            need = 1;
        } else if (b == 0xE0) {
            need = 2; lo = 0xA0;
        } else if ((b >= 0xE1 && b <= 0xEC) || b == 0xEE || b == 0xEF) {
            need = 2;
        } else if (b == 0xED) {
            need = 2; hi = 0x9F;
        } else if (b == 0xF0) {
            need = 3; lo = 0x90;
        } else if (b >= 0xF1 && b <= 0xF3) {
            need = 3;
        } else if (b == 0xF4) {
            need = 3; hi = 0x8F;
        } else {
            out += kReplacement;
            ++i;
            continue;
        }
        size_t j = i + 1;
        int got = 0;
        while (got < need && j < n) {
            unsigned char c = p[j];
            unsigned char l = got == 0 ? lo : 0x80;
            unsigned char h = got == 0 ? hi : 0xBF;
            if (c < l || c > h) break;
            ++j;
            ++got;
        }
        if (got == need) {
            out.append(s.substr(i, j - i));
        } else {
            out += kReplacement;
        }
        i = j;
    }
    return out;
}

std::string to_utf8(std::string_view bytes, std::string_view charset) {
    const std::string cs = normalize_charset(charset);
    if (is_utf8_alias(cs)) return repair_utf8(bytes);

    iconv_t cd = iconv_open("UTF-8", cs.c_str());
    if (cd == reinterpret_cast<iconv_t>(-1)) return repair_utf8(bytes);

    std::string out;
    std::array<char, 4096> buf{};
    char* in_ptr = const_cast<char*>(bytes.data());
    size_t in_left = bytes.size();
    while (in_left > 0) {
        char* out_ptr = buf.data();
        size_t out_left = buf.size();
        size_t rc = iconv(cd, &in_ptr, &in_left, &out_ptr, &out_left);
        out.append(buf.data(), buf.size() - out_left);
        if (rc == static_cast<size_t>(-1)) {
            if (errno == E2BIG) continue;
            // EILSEQ or EINVAL: replace one byte and resynchronize
            out += kReplacement;
            ++in_ptr;
            --in_left;
            iconv(cd, nullptr, nullptr, nullptr, nullptr);
        }
    }
    // flush any shift state
    char* out_ptr = buf.data();
    size_t out_left = buf.size();
    iconv(cd, nullptr, nullptr, &out_ptr, &out_left);
    out.append(buf.data(), buf.size() - out_left);
    iconv_close(cd);
    return out;
}

} // namespace phishscope
