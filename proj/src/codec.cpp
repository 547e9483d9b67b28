#include "drivekit/codec.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include "drivekit/errors.hpp"

namespace drivekit::codec {

std::string format_number(double value) {
    if (!std::isfinite(value)) throw RangeError("cannot render a non-finite control value");
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed, 2);
    if (ec != std::errc{}) throw RangeError("control value out of renderable range");
    std::string s(buf.data(), end);
    // "x.y0" -> "x.y", "x.00" -> "x.0"
    if (s.back() == '0') s.pop_back();
    if (s == "-0.0") s = "0.0";
    return s;
}

namespace {

std::string join_numbers(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ' ';
        out += format_number(values[i]);
    }
    return out;
}

char lower(char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_alpha(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

// Matches `word` case-insensitively at `pos`; returns the end offset.
std::optional<std::size_t> match_word(std::string_view text, std::size_t pos, std::string_view word) {
    if (pos + word.size() > text.size()) return std::nullopt;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (lower(text[pos + i]) != word[i]) return std::nullopt;
    }
    return pos + word.size();
}

std::size_t skip_space(std::string_view text, std::size_t pos) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    return pos;
}

// Signed decimal literal at `pos`: [+-]? digits [. digits] | [+-]? . digits
std::optional<double> read_decimal(std::string_view text, std::size_t pos) {
    std::size_t p = pos;
    bool negative = false;
    if (p < text.size() && (text[p] == '+' || text[p] == '-')) {
        negative = text[p] == '-';
        ++p;
    }
    const std::size_t digits_start = p;
    while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) ++p;
    std::size_t int_digits = p - digits_start;
    std::size_t frac_digits = 0;
    if (p < text.size() && text[p] == '.') {
        std::size_t q = p + 1;
        while (q < text.size() && std::isdigit(static_cast<unsigned char>(text[q]))) ++q;
        frac_digits = q - p - 1;
        if (frac_digits > 0) p = q;
    }
    if (int_digits == 0 && frac_digits == 0) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data() + digits_start, text.data() + p, value);
    if (ec != std::errc{} || ptr != text.data() + p) return std::nullopt;
    return negative ? -value : value;
}

// Each element of `words` must appear in order, separated by whitespace, then
// a colon, then the number.
std::vector<double> find_labeled(std::string_view text, std::initializer_list<std::string_view> words) {
    std::vector<double> found;
    const std::string_view first = *words.begin();
    for (std::size_t start = 0; start < text.size(); ++start) {
        if (start > 0 && is_alpha(text[start - 1])) continue;
        auto pos = match_word(text, start, first);
        if (!pos) continue;
        bool ok = true;
        for (auto it = words.begin() + 1; it != words.end() && ok; ++it) {
            const std::size_t after_gap = skip_space(text, *pos);
            if (after_gap == *pos) {
                ok = false;
                break;
            }
            pos = match_word(text, after_gap, *it);
            ok = pos.has_value();
        }
        if (!ok) continue;
        std::size_t p = skip_space(text, *pos);
        if (p >= text.size() || text[p] != ':') continue;
        p = skip_space(text, p + 1);
        if (auto v = read_decimal(text, p)) found.push_back(*v);
    }
    return found;
}

}  // namespace

std::string render_system_context(const ClipRecord& record) {
    return "This is a " + std::to_string(record.frame_ids.size()) +
           "-frame video. In this video, you are sitting in a vehicle on the road. "
           "The vehicle speed (m/s) of each frame is " +
           join_numbers(record.speeds) +
           ". The vehicle driving direction (degree) of each frame is " + join_numbers(record.angles) + ".";
}

std::string format_control_answer(const ControlEstimate& estimate) {
    if (!std::isfinite(estimate.speed) || !std::isfinite(estimate.angle)) {
        throw RangeError("control estimate must be finite");
    }
    return std::string(kSpeedLabel) + " " + format_number(estimate.speed) + "; " + std::string(kAngleLabel) + " " +
           format_number(estimate.angle);
}

ParsedControl parse_control_answer_detailed(std::string_view text) {
    const auto speeds = find_labeled(text, {"speed"});
    if (speeds.empty()) throw ExtractionError("speed");
    const auto angles = find_labeled(text, {"turning", "angle"});
    if (angles.empty()) throw ExtractionError("turning angle");
    ParsedControl out{{speeds.front(), angles.front()}, {}};
    if (speeds.size() > 1) out.warnings.push_back("multiple Speed: fields, using the first");
    if (angles.size() > 1) out.warnings.push_back("multiple Turning angle: fields, using the first");
    return out;
}

ControlEstimate parse_control_answer(std::string_view text) {
    return parse_control_answer_detailed(text).value;
}

}  // namespace drivekit::codec
