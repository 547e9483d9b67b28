#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "drivekit/types.hpp"

namespace drivekit::codec {

// The control-as-text wire contract with a trained model. These strings are
// frozen; changing them invalidates every dataset built with them.
inline constexpr std::string_view kSpeedLabel = "Speed:";
inline constexpr std::string_view kAngleLabel = "Turning angle:";

/// Renders a control value: correctly rounded to two fractional digits,
/// trailing zeros dropped, at least one fractional digit kept ("5.5", "0.0",
/// "20.04"). Negative zero renders as "0.0".
std::string format_number(double value);

/// "This is a 8-frame video. In this video, you are sitting in a vehicle on
/// the road. The vehicle speed (m/s) of each frame is ... The vehicle driving
/// direction (degree) of each frame is ..."
std::string render_system_context(const ClipRecord& record);

/// "Speed: {v}; Turning angle: {a}". Throws RangeError on non-finite input.
std::string format_control_answer(const ControlEstimate& estimate);

struct ParsedControl {
    ControlEstimate value;
    std::vector<std::string> warnings;
};

/// Pulls the first "Speed:" and "Turning angle:" values out of free text.
/// Labels match case-insensitively with any whitespace; the two fields may be
/// separated by ';', a newline, or prose. Throws ExtractionError naming the
/// missing field.
ParsedControl parse_control_answer_detailed(std::string_view text);
ControlEstimate parse_control_answer(std::string_view text);

}  // namespace drivekit::codec
