#include "drivekit/corpus.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "drivekit/errors.hpp"
#include "drivekit/io.hpp"

namespace drivekit::corpus {

using io::json;

namespace {

const json& require(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(line, std::string("missing field '") + key + "'");
    return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
    const json& v = require(obj, key, line);
    if (!v.is_string()) throw ParseError(line, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

double require_number(const json& v, const std::string& what, std::size_t line) {
    if (!v.is_number()) throw ParseError(line, what + " must be a number");
    return v.get<double>();
}

std::vector<double> require_numbers(const json& obj, const char* key, std::size_t line) {
    const json& v = require(obj, key, line);
    if (!v.is_array()) throw ParseError(line, std::string("field '") + key + "' must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(require_number(v[i], std::string(key) + "[" + std::to_string(i) + "]", line));
    }
    return out;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool has_text(const std::string& s) {
    return !trim(s).empty();
}

ClipRecord record_from_json(const json& j, std::size_t line) {
    ClipRecord r;
    r.clip_id = require_string(j, "clip_id", line);
    const json& frames = require(j, "frame_ids", line);
    if (!frames.is_array()) throw ParseError(line, "field 'frame_ids' must be an array");
    for (const auto& f : frames) {
        if (!f.is_string()) throw ParseError(line, "frame_ids entries must be strings");
        r.frame_ids.push_back(f.get<std::string>());
    }
    r.speeds = require_numbers(j, "speeds", line);
    r.angles = require_numbers(j, "angles", line);
    r.description = require_string(j, "description", line);
    r.justification = require_string(j, "justification", line);
    const auto split = require_string(j, "split", line);
    if (split == "train") {
        r.split = Split::train;
    } else if (split == "test") {
        r.split = Split::test;
    } else {
        throw ParseError(line, "split must be 'train' or 'test', got '" + split + "'");
    }
    if (auto it = j.find("next_control"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw ParseError(line, "field 'next_control' must be an object");
        r.next_control = ControlEstimate{
            require_number(require(*it, "speed", line), "next_control.speed", line),
            require_number(require(*it, "angle", line), "next_control.angle", line),
        };
    }
    return r;
}

Detection detection_from_json(const json& e, std::size_t line) {
    if (e.is_string()) {
        try {
            return parse_detection_entry(e.get<std::string>());
        } catch (const Error& err) {
            throw ParseError(line, err.what());
        }
    }
    if (!e.is_object()) throw ParseError(line, "detection entry must be an object or a string");
    Detection d;
    d.label = require_string(e, "label", line);
    const auto box = require_numbers(e, "box", line);
    if (box.size() != 4) throw ParseError(line, "box must have 4 coordinates");
    std::copy(box.begin(), box.end(), d.box.begin());
    return d;
}

}  // namespace

void validate(const ClipRecord& r) {
    auto fail = [&](const std::string& rule) { throw ValidationError(r.clip_id, rule); };
    if (r.clip_id.empty()) fail("empty clip_id");
    if (r.frame_ids.size() != kFrameCount) {
        fail("frame count: expected " + std::to_string(kFrameCount) + ", got " + std::to_string(r.frame_ids.size()));
    }
    if (r.speeds.size() != r.frame_ids.size()) {
        fail("length mismatch: " + std::to_string(r.speeds.size()) + " speeds for " +
             std::to_string(r.frame_ids.size()) + " frames");
    }
    if (r.angles.size() != r.frame_ids.size()) {
        fail("length mismatch: " + std::to_string(r.angles.size()) + " angles for " +
             std::to_string(r.frame_ids.size()) + " frames");
    }
    for (std::size_t i = 0; i < r.speeds.size(); ++i) {
        if (!std::isfinite(r.speeds[i])) fail("non-finite speed at frame " + std::to_string(i));
        if (r.speeds[i] < 0.0) fail("negative speed at frame " + std::to_string(i));
    }
    for (std::size_t i = 0; i < r.angles.size(); ++i) {
        if (!std::isfinite(r.angles[i])) fail("non-finite angle at frame " + std::to_string(i));
    }
    if (r.angles[0] != 0.0) fail("angles[0] must be 0.0 (angles are relative to the first frame)");
    if (!has_text(r.description)) fail("empty description");
    if (!has_text(r.justification)) fail("empty justification");
    if (r.next_control) {
        if (!std::isfinite(r.next_control->speed) || !std::isfinite(r.next_control->angle)) {
            fail("non-finite next_control");
        }
        if (r.next_control->speed < 0.0) fail("negative next_control speed");
    }
}

void validate(const DetectionSet& d) {
    auto fail = [&](const std::string& rule) { throw ValidationError(d.clip_id, rule); };
    if (d.clip_id.empty()) fail("empty clip_id");
    if (d.frames.size() != kFrameCount) {
        fail("frame count: expected " + std::to_string(kFrameCount) + ", got " + std::to_string(d.frames.size()));
    }
    for (std::size_t f = 0; f < d.frames.size(); ++f) {
        for (const auto& det : d.frames[f]) {
            const auto where = "frame " + std::to_string(f) + " '" + det.label + "'";
            if (det.label.empty()) fail("empty label in frame " + std::to_string(f));
            for (double c : det.box) {
                if (!std::isfinite(c) || c < 0.0 || c > 1.0) fail(where + ": box coordinate outside [0, 1]");
            }
            if (det.box[0] > det.box[2]) fail(where + ": x1 > x2");
            if (det.box[1] > det.box[3]) fail(where + ": y1 > y2");
        }
    }
}

Detection parse_detection_entry(std::string_view text) {
    text = trim(text);
    const auto open = text.rfind(":[");
    if (open == std::string_view::npos || text.empty() || text.back() != ']') {
        throw Error("parse_error", "detection entry must look like 'label:[x1, y1, x2, y2]'");
    }
    Detection d;
    d.label = std::string(trim(text.substr(0, open)));
    std::string_view body = text.substr(open + 2, text.size() - open - 3);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto comma = body.find(',');
        if ((k < 3) == (comma == std::string_view::npos)) {
            throw Error("parse_error", "detection box must have 4 coordinates");
        }
        const auto token = trim(body.substr(0, comma));
        const char* end = token.data() + token.size();
        auto [ptr, ec] = std::from_chars(token.data(), end, d.box[k]);
        if (ec != std::errc{} || ptr != end) {
            throw Error("parse_error", "bad box coordinate '" + std::string(token) + "'");
        }
        body = comma == std::string_view::npos ? std::string_view{} : body.substr(comma + 1);
    }
    return d;
}

std::vector<ClipRecord> parse_clip_annotations(std::istream& in) {
    std::vector<ClipRecord> out;
    std::set<std::string> seen;
    io::for_each_line(in, [&](std::size_t line, std::string_view text) {
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) throw ParseError(line, "invalid JSON");
        if (!j.is_object()) throw ParseError(line, "expected a JSON object");
        ClipRecord r = record_from_json(j, line);
        validate(r);
        if (!seen.insert(r.clip_id).second) {
            throw ValidationError(r.clip_id, "duplicate clip_id at line " + std::to_string(line));
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::map<std::string, DetectionSet> parse_detections(std::istream& in) {
    std::map<std::string, DetectionSet> out;
    io::for_each_line(in, [&](std::size_t line, std::string_view text) {
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) throw ParseError(line, "invalid JSON");
        if (!j.is_object()) throw ParseError(line, "expected a JSON object");
        DetectionSet d;
        d.clip_id = require_string(j, "clip_id", line);
        const json& frames = require(j, "frames", line);
        if (!frames.is_array()) throw ParseError(line, "field 'frames' must be an array");
        if (frames.size() > kFrameCount) {
            throw ValidationError(d.clip_id, "more than " + std::to_string(kFrameCount) + " frames");
        }
        for (const auto& frame : frames) {
            if (!frame.is_array()) throw ParseError(line, "each frame must be an array");
            std::vector<Detection> dets;
            for (const auto& e : frame) dets.push_back(detection_from_json(e, line));
            d.frames.push_back(std::move(dets));
        }
        d.frames.resize(kFrameCount);
        validate(d);
        if (out.contains(d.clip_id)) {
            throw ValidationError(d.clip_id, "duplicate clip_id at line " + std::to_string(line));
        }
        out.emplace(d.clip_id, std::move(d));
    });
    return out;
}

std::string serialize(const ClipRecord& r) {
    json j = {
        {"clip_id", r.clip_id},
        {"frame_ids", r.frame_ids},
        {"speeds", r.speeds},
        {"angles", r.angles},
        {"description", r.description},
        {"justification", r.justification},
        {"split", to_string(r.split)},
    };
    if (r.next_control) j["next_control"] = {{"speed", r.next_control->speed}, {"angle", r.next_control->angle}};
    return j.dump();
}

std::string serialize(const DetectionSet& d) {
    json frames = json::array();
    for (const auto& frame : d.frames) {
        json entries = json::array();
        for (const auto& det : frame) entries.push_back({{"label", det.label}, {"box", det.box}});
        frames.push_back(std::move(entries));
    }
    return json{{"clip_id", d.clip_id}, {"frames", std::move(frames)}}.dump();
}

DetectionSet empty_detections(const std::string& clip_id) {
    DetectionSet d;
    d.clip_id = clip_id;
    d.frames.resize(kFrameCount);
    return d;
}

Corpus join_corpus(std::vector<ClipRecord> records, const std::map<std::string, DetectionSet>& detections) {
    Corpus corpus;
    corpus.entries.reserve(records.size());
    for (auto& r : records) {
        auto it = detections.find(r.clip_id);
        DetectionSet d;
        if (it != detections.end()) {
            d = it->second;
        } else {
            d = empty_detections(r.clip_id);
            ++corpus.missing_detections;
        }
        corpus.entries.push_back({std::move(r), std::move(d)});
    }
    return corpus;
}

ControlTarget control_target(const ClipRecord& record) {
    if (record.next_control) return {*record.next_control, "next_step"};
    return {{record.speeds.back(), record.angles.back()}, "last_frame"};
}

}  // namespace drivekit::corpus
