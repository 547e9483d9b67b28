#include "drivekit/qagen.hpp"

#include <limits>
#include <set>

#include <json.hpp>

#include "drivekit/codec.hpp"
#include "drivekit/corpus.hpp"
#include "drivekit/errors.hpp"

namespace drivekit::qagen {

using json = nlohmann::json;

const std::vector<std::string>& QuestionBank::get(QuestionSet which) const {
    switch (which) {
        case QuestionSet::action:
            return set_a;
        case QuestionSet::justification:
            return set_j;
        case QuestionSet::control:
            break;
    }
    return set_c;
}

QuestionBank default_question_bank() {
    return QuestionBank{
        {
            "What is the current action of this vehicle?",
            "What is the vehicle doing right now in this video?",
            "What action is the vehicle performing in this video at the moment?",
            "Can you describe the vehicle's current activity in this video?",
            "What's happening with the vehicle in this video right now?",
            "At this moment in the video, what is the vehicle engaged in?",
            "What can you observe the vehicle doing in this video currently?",
            "How is the vehicle behaving at this point in the video?",
            "What is the ongoing action of the vehicle in the video?",
            "In this video, what action is the vehicle involved in at present?",
            "Describe the current state of the vehicle in this video.",
        },
        {
            "Why does this vehicle behave in this way?",
            "What is the reason behind this vehicle's behavior?",
            "Can you explain the cause of this vehicle's actions?",
            "What factors contribute to the way this vehicle is behaving?",
            "What's the rationale behind this vehicle's behavior?",
            "Why is the vehicle acting in this particular manner?",
            "What prompted the vehicle to behave like this?",
            "What circumstances led to this vehicle's behavior?",
            "What is the underlying cause of this vehicle's actions?",
            "For what reason is the vehicle exhibiting this behavior?",
            "What's driving the vehicle to behave in this way?",
        },
        {
            "Predict the speed and turning angle of the vehicle in the next frame.",
            "Foresee the speed and turning angle of the vehicle in the following frame.",
            "Anticipate the speed and turning angle of the vehicle in the subsequent frame.",
            "Estimate the speed and turning angle of the vehicle in the next frame.",
            "Project the speed and turning angle of the vehicle in the upcoming frame.",
            "Forecast the speed and turning angle of the vehicle in the ensuing frame.",
            "Envision the speed and turning angle of the vehicle in the next frame.",
            "Expect the speed and turning angle of the vehicle in the following frame.",
            "Presume the speed and turning angle of the vehicle in the subsequent frame.",
            "Prognosticate the speed and turning angle of the vehicle in the next frame.",
            "Calculate the speed and turning angle of the vehicle in the upcoming frame.",
        },
    };
}

namespace {

void normalize_set(std::vector<std::string>& set, const char* name) {
    if (set.empty()) throw ValidationError(name, "question set is empty");
    std::set<std::string> seen;
    for (auto& q : set) {
        const auto end = q.find_last_not_of(" \t\r\n");
        q.erase(end == std::string::npos ? 0 : end + 1);
        if (q.empty()) throw ValidationError(name, "blank question");
        if (!seen.insert(q).second) throw ValidationError(name, "duplicate question '" + q + "'");
    }
}

}  // namespace

QuestionBank normalize(QuestionBank bank) {
    normalize_set(bank.set_a, "set_a");
    normalize_set(bank.set_j, "set_j");
    normalize_set(bank.set_c, "set_c");
    return bank;
}

QuestionBank parse_question_bank(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(1, "question bank must be a JSON object");
    QuestionBank bank;
    auto read = [&](const char* key, std::vector<std::string>& out) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_array()) throw ParseError(1, std::string("missing list '") + key + "'");
        for (const auto& q : *it) {
            if (!q.is_string()) throw ParseError(1, std::string("non-string entry in '") + key + "'");
            out.push_back(q.get<std::string>());
        }
    };
    read("set_a", bank.set_a);
    read("set_j", bank.set_j);
    read("set_c", bank.set_c);
    return normalize(std::move(bank));
}

std::string serialize_question_bank(const QuestionBank& bank) {
    return json{{"set_a", bank.set_a}, {"set_j", bank.set_j}, {"set_c", bank.set_c}}.dump(2) + "\n";
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

SeededSampler SeededSampler::for_clip(std::uint64_t run_seed, std::string_view clip_id) {
    return SeededSampler(mix64(run_seed ^ mix64(fnv1a64(clip_id))));
}

std::uint64_t SeededSampler::below(std::uint64_t bound) {
    if (bound == 0) throw RangeError("SeededSampler::below needs a positive bound");
    // Reject the top partial block so every residue is equally likely.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

std::string sample_question(const QuestionBank& bank, QuestionSet which, SeededSampler& sampler) {
    const auto& set = bank.get(which);
    return set[sampler.below(set.size())];
}

InstructionSample build_fixed_sample(const ClipRecord& record, const QuestionBank& bank, SeededSampler& sampler) {
    const auto target = corpus::control_target(record);
    InstructionSample s;
    s.sample_id = record.clip_id + "#fixed";
    s.clip_id = record.clip_id;
    s.kind = SampleKind::fixed_qa;
    s.context = codec::render_system_context(record);
    s.control_target = target.source;
    s.turns = {
        {Speaker::human, sample_question(bank, QuestionSet::action, sampler)},
        {Speaker::assistant, record.description},
        {Speaker::human, sample_question(bank, QuestionSet::justification, sampler)},
        {Speaker::assistant, record.justification},
        {Speaker::human, sample_question(bank, QuestionSet::control, sampler)},
        {Speaker::assistant, codec::format_control_answer(target.value)},
    };
    return s;
}

std::vector<InstructionSample> generate_fixed_dataset(const Corpus& corpus, const QuestionBank& bank,
                                                      std::uint64_t seed) {
    std::vector<InstructionSample> out;
    out.reserve(corpus.entries.size());
    for (const auto& entry : corpus.entries) {
        auto sampler = SeededSampler::for_clip(seed, entry.record.clip_id);
        out.push_back(build_fixed_sample(entry.record, bank, sampler));
    }
    return out;
}

}  // namespace drivekit::qagen
