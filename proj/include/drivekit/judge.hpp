#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "drivekit/chatclient.hpp"
#include "drivekit/metrics.hpp"

namespace drivekit::judge {

struct JudgeVerdict {
    double score = 0.0;  // [0, 1], two decimals
    std::string explanation;
    std::string raw;
};

/// The evaluation prompt with the label and prediction substituted. Throws
/// ValidationError when either is blank.
std::string render_judge_prompt(std::string_view gt_label, std::string_view prediction);

/// Takes the first decimal literal in the response as the score. Throws
/// ExtractionError when there is none and RangeError when it is outside [0, 1].
JudgeVerdict parse_judge_score(std::string_view response_text);

struct JudgePair {
    std::string clip_id;
    metrics::Task task = metrics::Task::description;
    std::string gt_label;
    std::string prediction;
};

struct PairResult {
    JudgePair pair;
    std::optional<JudgeVerdict> verdict;
    std::string error;  // set when verdict is empty
};

struct JudgeReport {
    std::vector<PairResult> results;  // input order
    double mean = 0.0;                // mean score x 100 over scored pairs
    std::size_t scored = 0;
    std::size_t excluded = 0;

    /// Per-task means in the metrics report shape.
    std::vector<metrics::JudgeSummary> per_task() const;
};

struct JudgeConfig {
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_tokens = 256;
    std::size_t workers = 4;
};

chat::ChatRequest judge_request(const JudgeConfig& config, const JudgePair& pair);

/// Scores every pair; parse and client failures are excluded from the mean
/// and counted, never fatal.
JudgeReport judge_batch(const std::vector<JudgePair>& pairs, chat::ChatClient& client, const JudgeConfig& config);

/// Aggregates already-scored results (used by judge_batch and when
/// re-reading a report file).
void aggregate(JudgeReport& report);

/// {"pairs": [{"clip_id","task","score","explanation","error"}...],
///  "aggregate": {"score","scored","excluded","per_task": {...}}}
nlohmann::json report_to_json(const JudgeReport& report);
JudgeReport report_from_json(const nlohmann::json& j);

}  // namespace drivekit::judge
