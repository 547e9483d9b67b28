#include "drivekit/convgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include <json.hpp>

#include "drivekit/codec.hpp"
#include "drivekit/errors.hpp"
#include "drivekit/io.hpp"
#include "drivekit/parallel.hpp"
#include "drivekit/qagen.hpp"

namespace drivekit::convgen {

using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string join_numbers(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += codec::format_number(values[i]);
    }
    return out;
}

std::string render_box(const Box& box) {
    return "[" + io::shortest_decimal(box[0]) + ", " + io::shortest_decimal(box[1]) + ", " +
           io::shortest_decimal(box[2]) + ", " + io::shortest_decimal(box[3]) + "]";
}

std::string strip_trailing_periods(std::string_view s) {
    s = trim(s);
    while (!s.empty() && s.back() == '.') s.remove_suffix(1);
    return std::string(trim(s));
}

}  // namespace

PrivilegedInfo privileged_info(const ClipRecord& record, const DetectionSet& detections) {
    return {record.description, record.justification, detections, record.speeds, record.angles};
}

std::string render_objects(const DetectionSet& detections) {
    std::string out;
    for (std::size_t f = 0; f < detections.frames.size(); ++f) {
        if (f) out += '\n';
        out += "Frame " + std::to_string(f) + ":";
        const auto& frame = detections.frames[f];
        for (std::size_t k = 0; k < frame.size(); ++k) {
            out += k ? ", " : " ";
            out += frame[k].label + ":" + render_box(frame[k].box);
        }
    }
    return out;
}

std::string render_captions(const ClipRecord& record) {
    return strip_trailing_periods(record.description) + " " + strip_trailing_periods(record.justification);
}

std::string render_conversation_prompt(const ClipRecord& record, const DetectionSet& detections) {
    std::string p;
    p += "There is a " + std::to_string(record.frame_ids.size()) + "-frame video recording a drive driving a vehicle. ";
    p += render_captions(record);
    p += ". There are some exclusive privilege information, but you cannot mention them in your generated question "
         "answering. 1. Objects in each frame of the video: ";
    p += render_objects(detections);
    p += "; 2. The speed (m/s) of the vehicle in each frame :";
    p += join_numbers(record.speeds);
    p += ". The turning angle (degree) of the vehicle in each frame :";
    p += join_numbers(record.angles);
    p += ".\n\n";
    p += "Design a conversation between you and a person asking about this video. The answers should be in a tone "
         "that a visual AI assistant is seeing the video and answering the question.\n"
         "Ask diverse questions and give corresponding answers.\n\n"
         "Include questions asking about the visual content of the video, including the ego vehicle, traffic light, "
         "turning direction, lane change, surrounding objects, objects spatial relations, etc. Only include "
         "questions that have definite answers:\n"
         "(1) one can see the content in the video that the question asks about and can answer confidently;\n"
         "(2) one can determine confidently from the video that it is not in the video.\n"
         "Do not ask any question that cannot be answered confidently.\n"
         "Do not contain specific numbers in the questions, e.g., normalized coordinates, speed value, turning "
         "angle.\n\n"
         "Also include complex questions that are relevant to the content in the video, for example, asking about "
         "background knowledge of the objects in the video, asking to discuss about events happening in the video, "
         "etc. Again, do not ask about uncertain details.\n"
         "Provide detailed answers when answering complex questions. For example, give detailed examples or "
         "reasoning steps to make the content more convincing and well-organized. You can include multiple "
         "paragraphs if necessary.\n\n"
         "The conversation should be 3 turns. Make the answer concise and accurate.";
    return p;
}

namespace {

struct Tag {
    Speaker speaker;
    std::size_t text_start;
};

// Recognizes "User:", "**AI**:", "Assistant :" and friends at line start.
std::optional<Tag> match_tag(std::string_view line) {
    std::size_t p = 0;
    auto skip_decor = [&] {
        while (p < line.size() && (line[p] == ' ' || line[p] == '\t' || line[p] == '*' || line[p] == '#' ||
                                   line[p] == '-' || line[p] == '>')) {
            ++p;
        }
    };
    skip_decor();
    std::size_t word_start = p;
    while (p < line.size() && std::isalpha(static_cast<unsigned char>(line[p]))) ++p;
    std::string word(line.substr(word_start, p - word_start));
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::tolower(c); });
    Speaker speaker;
    if (word == "user" || word == "human") {
        speaker = Speaker::human;
    } else if (word == "ai" || word == "assistant") {
        speaker = Speaker::assistant;
    } else {
        return std::nullopt;
    }
    while (p < line.size() && (line[p] == ' ' || line[p] == '\t' || line[p] == '*')) ++p;
    if (p >= line.size() || line[p] != ':') return std::nullopt;
    ++p;
    while (p < line.size() && line[p] == '*') ++p;
    return Tag{speaker, p};
}

}  // namespace

ConversationDraft parse_conversation(std::string_view raw_text) {
    ConversationDraft draft;
    draft.raw_text = std::string(raw_text);
    auto reject = [&](std::string reason) {
        draft.accepted = false;
        draft.rejection = std::move(reason);
        return draft;
    };
    if (trim(raw_text).empty()) return reject("empty");

    std::vector<Turn> turns;
    std::vector<std::vector<std::string>> bodies;
    bool preamble = false;
    std::size_t pos = 0;
    while (pos <= raw_text.size()) {
        auto nl = raw_text.find('\n', pos);
        if (nl == std::string_view::npos) nl = raw_text.size();
        std::string_view line = raw_text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = nl + 1;

        if (auto tag = match_tag(line)) {
            turns.push_back({tag->speaker, {}});
            bodies.push_back({std::string(trim(line.substr(tag->text_start)))});
        } else if (!bodies.empty()) {
            bodies.back().push_back(std::string(trim(line)));
        } else if (!trim(line).empty()) {
            preamble = true;
        }
    }
    if (turns.empty()) return reject("no_speaker_tags");
    if (preamble) draft.warnings.push_back("ignored text before the first speaker tag");

    for (std::size_t i = 0; i < turns.size(); ++i) {
        std::string text;
        for (const auto& l : bodies[i]) {
            if (!text.empty()) text += '\n';
            text += l;
        }
        turns[i].text = std::string(trim(text));
    }
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const Speaker expected = i % 2 == 0 ? Speaker::human : Speaker::assistant;
        if (turns[i].speaker != expected) return reject("non_alternating_at_turn=" + std::to_string(i));
        if (turns[i].text.empty()) return reject("empty_turn=" + std::to_string(i));
    }
    if (turns.size() % 2 != 0) return reject("unanswered_question");
    const std::size_t rounds = turns.size() / 2;
    if (rounds != 3) return reject("round_count=" + std::to_string(rounds));
    draft.turns = std::move(turns);
    draft.accepted = true;
    return draft;
}

namespace {

struct Literal {
    std::string text;
    double value;
};

std::vector<Literal> numeric_literals(std::string_view s) {
    std::vector<Literal> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (start > 0 && s[start - 1] == '-') --start;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (i + 1 < s.size() && s[i] == '.' && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
            ++i;
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        }
        std::string text(s.substr(start, i - start));
        out.push_back({text, std::strtod(text.c_str(), nullptr)});
    }
    return out;
}

long long hundredths(double v) {
    return std::llround(v * 100.0);
}

}  // namespace

std::vector<std::string> validate_conversation(const ConversationDraft& draft, const PrivilegedInfo& privileged) {
    std::vector<std::string> warnings;
    std::map<long long, std::string> values;  // at 2 decimals -> what it is
    for (double v : privileged.speeds) values.emplace(hundredths(v), "speed");
    for (double v : privileged.angles) values.emplace(hundredths(v), "turning angle");
    std::set<std::string> box_tokens;
    std::vector<std::string> box_strings;
    for (const auto& frame : privileged.detections.frames) {
        for (const auto& det : frame) {
            for (double c : det.box) {
                values.emplace(hundredths(c), "box coordinate");
                box_tokens.insert(io::shortest_decimal(c));
            }
            box_strings.push_back(render_box(det.box));
        }
    }

    for (std::size_t i = 0; i < draft.turns.size(); ++i) {
        const auto& turn = draft.turns[i];
        const auto literals = numeric_literals(turn.text);
        if (turn.speaker == Speaker::human) {
            for (const auto& lit : literals) {
                auto it = values.find(hundredths(lit.value));
                if (it != values.end()) {
                    warnings.push_back("question_leak: turn " + std::to_string(i) + " mentions " + lit.text + " (" +
                                       it->second + ")");
                }
            }
        }
        for (const auto& box : box_strings) {
            if (turn.text.find(box) != std::string::npos) {
                warnings.push_back("box_leak: turn " + std::to_string(i) + " quotes box " + box);
            }
        }
        for (const auto& lit : literals) {
            if (lit.text.find('.') != std::string::npos && box_tokens.contains(lit.text)) {
                warnings.push_back("box_coordinate_leak: turn " + std::to_string(i) + " quotes " + lit.text);
            }
        }
    }
    return warnings;
}

std::vector<std::size_t> select_clips(std::size_t n, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("conversation ratio must be in [0, 1]");
    const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    qagen::SeededSampler sampler(qagen::mix64(seed ^ qagen::fnv1a64("convgen.select")));
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[sampler.below(i)]);
    }
    order.resize(std::min(k, n));
    std::sort(order.begin(), order.end());
    return order;
}

chat::ChatRequest conversation_request(const ConvGenConfig& config, const std::string& prompt) {
    chat::ChatRequest req;
    req.model_name = config.model;
    req.temperature = config.temperature;
    req.max_tokens = config.max_tokens;
    req.messages.push_back({chat::Role::user, prompt});
    return req;
}

namespace {

std::string regeneration_nudge(const std::string& reason) {
    return "The conversation above could not be used (" + reason +
           "). Rewrite it as exactly 3 turns. Start each question on a new line with \"User:\" and each answer on a "
           "new line with \"AI:\".";
}

}  // namespace

ConversationBuild generate_conversations(const Corpus& corpus, chat::ChatClient& client, const ConvGenConfig& config,
                                         std::uint64_t seed) {
    const auto& entries = corpus.entries;
    const auto selected = select_clips(entries.size(), config.ratio, seed);

    ConversationBuild build;
    build.manifest.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        build.manifest[i] = {entries[i].record.clip_id, "skipped", "not selected", 0, {}};
    }
    std::vector<std::optional<InstructionSample>> slots(entries.size());

    parallel_for(selected.size(), config.workers, [&](std::size_t s) {
        const std::size_t idx = selected[s];
        const auto& entry = entries[idx];
        auto& m = build.manifest[idx];
        m.reason.clear();
        try {
            const std::string prompt = render_conversation_prompt(entry.record, entry.detections);
            auto request = conversation_request(config, prompt);
            auto response = client.complete(request);
            m.attempts = 1;
            auto draft = parse_conversation(response.text);
            if (!draft.accepted && config.retry_rejected) {
                request.messages.push_back({chat::Role::assistant, response.text});
                request.messages.push_back({chat::Role::user, regeneration_nudge(draft.rejection)});
                const auto first_reason = draft.rejection;
                response = client.complete(request);
                m.attempts = 2;
                draft = parse_conversation(response.text);
                if (!draft.accepted) draft.rejection = first_reason + "; retry: " + draft.rejection;
            }
            if (!draft.accepted) {
                m.outcome = "rejected";
                m.reason = draft.rejection;
                return;
            }
            m.warnings = draft.warnings;
            auto leaks = validate_conversation(draft, privileged_info(entry.record, entry.detections));
            m.warnings.insert(m.warnings.end(), leaks.begin(), leaks.end());
            if (config.drop_on_leak && !leaks.empty()) {
                m.outcome = "rejected";
                m.reason = "privileged_leak";
                return;
            }
            InstructionSample sample;
            sample.sample_id = entry.record.clip_id + "#conv";
            sample.clip_id = entry.record.clip_id;
            sample.kind = SampleKind::conversation;
            sample.turns = std::move(draft.turns);
            sample.context = codec::render_system_context(entry.record);
            m.outcome = "accepted";
            slots[idx] = std::move(sample);
        } catch (const Error& e) {
            m.outcome = "error";
            m.reason = e.kind() + ": " + e.what();
        }
    });

    for (auto& slot : slots) {
        if (slot) build.samples.push_back(std::move(*slot));
    }
    for (const auto& m : build.manifest) {
        if (m.outcome == "accepted") {
            ++build.accepted;
        } else if (m.outcome == "rejected") {
            ++build.rejected;
        } else if (m.outcome == "error") {
            ++build.errors;
        } else {
            ++build.skipped;
        }
    }
    return build;
}

std::string serialize_manifest(const std::vector<ManifestEntry>& manifest) {
    std::string out;
    for (const auto& m : manifest) {
        out += json{
            {"clip_id", m.clip_id},
            {"outcome", m.outcome},
            {"reason", m.reason},
            {"attempts", m.attempts},
            {"warnings", m.warnings},
        }
                   .dump();
        out += '\n';
    }
    return out;
}

}  // namespace drivekit::convgen
