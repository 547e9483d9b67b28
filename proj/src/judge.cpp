#include "drivekit/judge.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "drivekit/errors.hpp"
#include "drivekit/parallel.hpp"

namespace drivekit::judge {

using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// The template ends each slot with its own period.
std::string slot(std::string_view text) {
    text = trim(text);
    while (!text.empty() && text.back() == '.') text.remove_suffix(1);
    return std::string(trim(text));
}

bool is_digit(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

// Leading separators a judge tends to put between score and explanation.
std::string_view strip_separators(std::string_view s) {
    static constexpr std::string_view kDashes[] = {"\xe2\x80\x94", "\xe2\x80\x93"};  // em and en dash
    for (;;) {
        s = trim(s);
        if (s.empty()) return s;
        if (s.front() == '-' || s.front() == ':' || s.front() == ',' || s.front() == '.' || s.front() == ';') {
            s.remove_prefix(1);
            continue;
        }
        bool stripped = false;
        for (auto dash : kDashes) {
            if (s.starts_with(dash)) {
                s.remove_prefix(dash.size());
                stripped = true;
            }
        }
        if (!stripped) return s;
    }
}

}  // namespace

std::string render_judge_prompt(std::string_view gt_label, std::string_view prediction) {
    if (trim(gt_label).empty()) throw ValidationError("judge", "empty ground-truth label");
    if (trim(prediction).empty()) throw ValidationError("judge", "empty prediction");
    return "Now there are some descritions about a driver driving a vehicle. The ground truth description is: " +
           slot(gt_label) + ". The description generated by deep learning model is: " + slot(prediction) +
           ".\n\n"
           "Give me an evaluation score about the predicted description. The score should range from 0 to 1. Larger "
           "score means better description. The score should be a float number with 2 decimal places. For example, "
           "0.51, 0.99, 0.00, 0.76, etc.\n\n"
           "You should first give me the score number, and then provide explanations for your score number.";
}

JudgeVerdict parse_judge_score(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size() && !is_digit(text[i])) {
        if (text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1])) break;
        ++i;
    }
    if (i == text.size()) throw ExtractionError("score");
    std::size_t start = i;
    bool negative = false;
    if (start > 0 && (text[start - 1] == '-' || text[start - 1] == '+')) {
        negative = text[start - 1] == '-';
    }
    std::size_t end = i;
    while (end < text.size() && is_digit(text[end])) ++end;
    if (end + 1 < text.size() && text[end] == '.' && is_digit(text[end + 1])) {
        ++end;
        while (end < text.size() && is_digit(text[end])) ++end;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + end, value);
    if (ec != std::errc{}) throw ExtractionError("score");
    if (negative) value = -value;
    if (!(value >= 0.0 && value <= 1.0)) {
        throw RangeError("judge score " + std::string(text.substr(negative ? start - 1 : start, end - start + negative)) +
                         " is outside [0, 1]");
    }
    JudgeVerdict v;
    v.score = std::round(value * 100.0) / 100.0;
    v.explanation = std::string(strip_separators(text.substr(end)));
    v.raw = std::string(text);
    return v;
}

chat::ChatRequest judge_request(const JudgeConfig& config, const JudgePair& pair) {
    chat::ChatRequest req;
    req.model_name = config.model;
    req.temperature = config.temperature;
    req.max_tokens = config.max_tokens;
    req.messages.push_back({chat::Role::user, render_judge_prompt(pair.gt_label, pair.prediction)});
    return req;
}

void aggregate(JudgeReport& report) {
    report.scored = 0;
    report.excluded = 0;
    double sum = 0.0;
    for (const auto& r : report.results) {
        if (r.verdict) {
            ++report.scored;
            sum += r.verdict->score;
        } else {
            ++report.excluded;
        }
    }
    report.mean = report.scored ? 100.0 * sum / static_cast<double>(report.scored) : 0.0;
}

std::vector<metrics::JudgeSummary> JudgeReport::per_task() const {
    std::vector<metrics::JudgeSummary> out;
    for (metrics::Task task : metrics::kTasks) {
        metrics::JudgeSummary s;
        s.task = task;
        double sum = 0.0;
        bool any = false;
        for (const auto& r : results) {
            if (r.pair.task != task) continue;
            any = true;
            if (r.verdict) {
                ++s.scored;
                sum += r.verdict->score;
            } else {
                ++s.excluded;
            }
        }
        if (!any) continue;
        s.mean = s.scored ? 100.0 * sum / static_cast<double>(s.scored) : 0.0;
        out.push_back(s);
    }
    return out;
}

JudgeReport judge_batch(const std::vector<JudgePair>& pairs, chat::ChatClient& client, const JudgeConfig& config) {
    JudgeReport report;
    report.results.resize(pairs.size());
    parallel_for(pairs.size(), config.workers, [&](std::size_t i) {
        auto& r = report.results[i];
        r.pair = pairs[i];
        try {
            const auto response = client.complete(judge_request(config, pairs[i]));
            r.verdict = parse_judge_score(response.text);
        } catch (const Error& e) {
            r.error = e.kind() + ": " + e.what();
        }
    });
    aggregate(report);
    return report;
}

json report_to_json(const JudgeReport& report) {
    json pairs = json::array();
    for (const auto& r : report.results) {
        json p = {
            {"clip_id", r.pair.clip_id},
            {"task", metrics::to_string(r.pair.task)},
        };
        if (r.verdict) {
            p["score"] = r.verdict->score;
            p["explanation"] = r.verdict->explanation;
        } else {
            p["score"] = nullptr;
            p["error"] = r.error;
        }
        pairs.push_back(std::move(p));
    }
    json per_task = json::object();
    for (const auto& s : report.per_task()) {
        per_task[metrics::to_string(s.task)] = {{"score", s.mean}, {"scored", s.scored}, {"excluded", s.excluded}};
    }
    return {
        {"pairs", std::move(pairs)},
        {"aggregate",
         {{"score", report.mean}, {"scored", report.scored}, {"excluded", report.excluded}, {"per_task", per_task}}},
    };
}

JudgeReport report_from_json(const json& j) {
    JudgeReport report;
    try {
        for (const auto& p : j.at("pairs")) {
            PairResult r;
            r.pair.clip_id = p.at("clip_id").get<std::string>();
            const auto task = p.at("task").get<std::string>();
            bool known = false;
            for (metrics::Task t : metrics::kTasks) {
                if (task == metrics::to_string(t)) {
                    r.pair.task = t;
                    known = true;
                }
            }
            if (!known) throw DecodeError("unknown judge task '" + task + "'");
            if (p.at("score").is_number()) {
                r.verdict = JudgeVerdict{p["score"].get<double>(), p.value("explanation", std::string{}), {}};
            } else {
                r.error = p.value("error", std::string{});
            }
            report.results.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw DecodeError(std::string("malformed judge report: ") + e.what());
    }
    aggregate(report);
    return report;
}

}  // namespace drivekit::judge
