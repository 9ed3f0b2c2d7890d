#include "scalefit/format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace scalefit {

std::string format_shortest(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

std::string format_g17(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return std::string(buf, end);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_plain(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

bool parse_real(std::string_view text, double& out) {
    text = trim(text);
    if (auto caret = text.find('^'); caret != std::string_view::npos) {
        double base = 0.0;
        double exponent = 0.0;
        if (!parse_plain(text.substr(0, caret), base) || !parse_plain(text.substr(caret + 1), exponent)) {
            return false;
        }
        // exp2 is exact for integral exponents, unlike pow on some libms.
        out = base == 2.0 ? std::exp2(exponent) : std::pow(base, exponent);
        return std::isfinite(out);
    }
    return parse_plain(text, out) && std::isfinite(out);
}

bool parse_integer(std::string_view text, std::int64_t& out) {
    text = trim(text);
    if (text.empty()) return false;
    if (auto caret = text.find('^'); caret != std::string_view::npos) {
        if (text.substr(0, caret) != "2") return false;
        int exponent = 0;
        auto rest = text.substr(caret + 1);
        auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), exponent);
        if (ec != std::errc{} || ptr != rest.data() + rest.size() || exponent < 0 || exponent > 62) return false;
        out = std::int64_t{1} << exponent;
        return true;
    }
    if (text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

std::string content_digest(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace scalefit
