#pragma once

#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drivekit/types.hpp"

namespace drivekit::corpus {

// Annotation line schema:
//   {"clip_id": str, "frame_ids": [8 x str], "speeds": [8 x num], "angles": [8 x num],
//    "description": str, "justification": str, "split": "train"|"test",
//    "next_control": {"speed": num, "angle": num}   (optional)}
//
// Detection line schema:
//   {"clip_id": str, "frames": [<= 8 x [entry...]]}
// where each entry is {"label": str, "box": [x1, y1, x2, y2]} or the compact
// text form "label:[x1, y1, x2, y2]". Frames past the end of the array are
// empty.

std::vector<ClipRecord> parse_clip_annotations(std::istream& in);
std::map<std::string, DetectionSet> parse_detections(std::istream& in);

/// Throws ValidationError naming the first violated rule.
void validate(const ClipRecord& record);
void validate(const DetectionSet& detections);

/// Parses one compact detection entry such as "traffic light:[0.967, 0.525, 0.993, 0.613]".
/// Does not validate the box.
Detection parse_detection_entry(std::string_view text);

std::string serialize(const ClipRecord& record);
std::string serialize(const DetectionSet& detections);

DetectionSet empty_detections(const std::string& clip_id);

/// Pairs every record with its detections; clips without detections get an
/// empty set and bump `missing_detections`.
Corpus join_corpus(std::vector<ClipRecord> records, const std::map<std::string, DetectionSet>& detections);

/// The control label the model is trained to predict for this clip, and
/// whether it came from the step after the clip ("next_step") or from the
/// clip's final frame ("last_frame").
struct ControlTarget {
    ControlEstimate value;
    const char* source;
};
ControlTarget control_target(const ClipRecord& record);

}  // namespace drivekit::corpus
