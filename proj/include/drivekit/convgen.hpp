#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "drivekit/chatclient.hpp"
#include "drivekit/types.hpp"

namespace drivekit::convgen {

/// Ground truth handed to the teacher model but forbidden from appearing in
/// its questions.
struct PrivilegedInfo {
    std::string description;
    std::string justification;
    DetectionSet detections;
    std::vector<double> speeds;
    std::vector<double> angles;
};

PrivilegedInfo privileged_info(const ClipRecord& record, const DetectionSet& detections);

/// "Frame 0: car:[0.298, 0.408, 0.572, 0.756], truck:[...]" one line per
/// frame; an empty frame renders as "Frame 5:".
std::string render_objects(const DetectionSet& detections);

/// Description and justification joined by a space, trailing periods
/// dropped (the template supplies its own).
std::string render_captions(const ClipRecord& record);

/// The conversation-generation prompt with captions, objects, speeds and
/// turning angles substituted.
std::string render_conversation_prompt(const ClipRecord& record, const DetectionSet& detections);

struct ConversationDraft {
    std::string raw_text;
    std::vector<Turn> turns;
    std::vector<std::string> warnings;
    bool accepted = false;
    std::string rejection;  // set when !accepted, e.g. "round_count=2"
};

/// Splits "User:"/"AI:" (also "Human:"/"Assistant:", any case) tagged text
/// into turns. Untagged lines continue the current turn. Accepted only with
/// exactly three human/assistant rounds.
ConversationDraft parse_conversation(std::string_view raw_text);

/// Leakage checks: numbers in questions that equal a privileged speed, angle
/// or box coordinate at two decimals, and box coordinates quoted verbatim in
/// any turn.
std::vector<std::string> validate_conversation(const ConversationDraft& draft, const PrivilegedInfo& privileged);

struct ConvGenConfig {
    double ratio = 0.72;  // share of clips that get a conversation
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_tokens = 1024;
    bool retry_rejected = true;  // one regeneration attempt with a nudge
    bool drop_on_leak = false;
    std::size_t workers = 4;
};

struct ManifestEntry {
    std::string clip_id;
    std::string outcome;  // accepted | rejected | error | skipped
    std::string reason;
    int attempts = 0;
    std::vector<std::string> warnings;
};

struct ConversationBuild {
    std::vector<InstructionSample> samples;  // corpus order
    std::vector<ManifestEntry> manifest;     // one per corpus clip, corpus order
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t errors = 0;
    std::size_t skipped = 0;
};

/// Seeded subset of [0, n) of size round(ratio * n), ascending.
std::vector<std::size_t> select_clips(std::size_t n, double ratio, std::uint64_t seed);

chat::ChatRequest conversation_request(const ConvGenConfig& config, const std::string& prompt);

ConversationBuild generate_conversations(const Corpus& corpus, chat::ChatClient& client, const ConvGenConfig& config,
                                         std::uint64_t seed);

/// One JSON object per line: {"clip_id","outcome","reason","attempts","warnings"}.
std::string serialize_manifest(const std::vector<ManifestEntry>& manifest);

}  // namespace drivekit::convgen
