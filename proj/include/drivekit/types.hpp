#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace drivekit {

/// Every clip is sampled into this many frames; not configurable.
inline constexpr std::size_t kFrameCount = 8;

enum class Split { train, test };

struct ControlEstimate {
    double speed = 0.0;  // m/s
    double angle = 0.0;  // degrees, relative to the clip's first frame

    bool operator==(const ControlEstimate&) const = default;
};

struct ClipRecord {
    std::string clip_id;
    std::vector<std::string> frame_ids;
    std::vector<double> speeds;
    std::vector<double> angles;
    std::string description;
    std::string justification;
    Split split = Split::train;
    // Label for the step after the last input frame, when the source has one.
    std::optional<ControlEstimate> next_control;

    bool operator==(const ClipRecord&) const = default;
};

using Box = std::array<double, 4>;  // x1, y1, x2, y2, normalized

struct Detection {
    std::string label;
    Box box{};

    bool operator==(const Detection&) const = default;
};

struct DetectionSet {
    std::string clip_id;
    std::vector<std::vector<Detection>> frames;  // always kFrameCount entries

    bool operator==(const DetectionSet&) const = default;
};

struct CorpusEntry {
    ClipRecord record;
    DetectionSet detections;
};

struct Corpus {
    std::vector<CorpusEntry> entries;
    std::size_t missing_detections = 0;
};

enum class Speaker { human, assistant };

struct Turn {
    Speaker speaker = Speaker::human;
    std::string text;

    bool operator==(const Turn&) const = default;
};

enum class SampleKind { fixed_qa, conversation };

struct InstructionSample {
    std::string sample_id;
    std::string clip_id;
    SampleKind kind = SampleKind::fixed_qa;
    std::vector<Turn> turns;
    // Model-input context block rendered from the clip's signals.
    std::string context;
    // Which label fed the control answer: "next_step" or "last_frame".
    // Empty for conversations.
    std::string control_target;

    bool operator==(const InstructionSample&) const = default;
};

const char* to_string(Split split);
const char* to_string(Speaker speaker);
const char* to_string(SampleKind kind);

/// Returns an empty string when the sample satisfies the structural
/// invariants (alternating, human first, exactly three rounds), else the
/// violated rule.
std::string check_sample(const InstructionSample& sample);

}  // namespace drivekit
