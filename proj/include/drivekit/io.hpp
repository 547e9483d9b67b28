#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "drivekit/types.hpp"

namespace drivekit::io {

using json = nlohmann::json;

/// Calls `fn(line_number, line)` for every non-blank line. Line numbers are
/// 1-based and count blank lines too.
void for_each_line(std::istream& in, const std::function<void(std::size_t, std::string_view)>& fn);

/// Parses one JSON object per non-blank line; a syntax error becomes a
/// ParseError carrying the line number.
std::vector<json> read_jsonl(std::istream& in);

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

/// Shortest decimal that round-trips the double, with at least one
/// fractional digit ("1.0", "0.298").
std::string shortest_decimal(double value);

// Instruction-sample dataset lines follow the LLaVA conversation layout:
// {"sample_id","clip_id","kind","conversations":[{"from":"human"|"gpt","value"}],
//  "context","control_target"}.
json sample_to_json(const InstructionSample& sample);
InstructionSample sample_from_json(const json& j);
std::string serialize_samples(std::span<const InstructionSample> samples);

}  // namespace drivekit::io
