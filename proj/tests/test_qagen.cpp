#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "drivekit/codec.hpp"
#include "drivekit/corpus.hpp"
#include "drivekit/errors.hpp"
#include "drivekit/io.hpp"
#include "drivekit/qagen.hpp"
#include "fixtures.hpp"

using namespace drivekit;

namespace {

Corpus corpus_of(std::size_t n, std::uint64_t seed = 4) {
    return corpus::join_corpus(fixtures::synthetic_records(n, seed), {});
}

bool member(const std::vector<std::string>& set, const std::string& q) {
    return std::find(set.begin(), set.end(), q) != set.end();
}

}  // namespace

TEST_CASE("default bank has eleven distinct questions per set") {
    const auto bank = qagen::default_question_bank();
    for (auto which : {qagen::QuestionSet::action, qagen::QuestionSet::justification, qagen::QuestionSet::control}) {
        const auto& set = bank.get(which);
        CHECK(set.size() == 11);
        CHECK(std::set<std::string>(set.begin(), set.end()).size() == 11);
    }
    CHECK(bank.set_a.front() == "What is the current action of this vehicle?");
    CHECK(member(bank.set_j, "What's driving the vehicle to behave in this way?"));
    CHECK(member(bank.set_c, "Forecast the speed and turning angle of the vehicle in the ensuing frame."));
    CHECK_NOTHROW(qagen::normalize(bank));
}

TEST_CASE("shipped question-bank file matches the built-in bank") {
    const auto text = fixtures::slurp(std::string(GOLDEN_DIR) + "/../../data/question_bank.json");
    const auto bank = qagen::parse_question_bank(text);
    const auto expected = qagen::default_question_bank();
    CHECK(bank.set_a == expected.set_a);
    CHECK(bank.set_j == expected.set_j);
    CHECK(bank.set_c == expected.set_c);
}

TEST_CASE("normalization trims and rejects bad sets") {
    qagen::QuestionBank bank{{"A?  ", "B?\t"}, {"J?"}, {"C?"}};
    const auto n = qagen::normalize(bank);
    CHECK(n.set_a == std::vector<std::string>{"A?", "B?"});

    CHECK_THROWS_AS(qagen::normalize({{}, {"J?"}, {"C?"}}), ValidationError);
    CHECK_THROWS_AS(qagen::normalize({{"A?", "  "}, {"J?"}, {"C?"}}), ValidationError);
    CHECK_THROWS_AS(qagen::normalize({{"A?", "A? "}, {"J?"}, {"C?"}}), ValidationError);
}

TEST_CASE("question-bank files round-trip and are checked") {
    const auto bank = qagen::default_question_bank();
    const auto back = qagen::parse_question_bank(qagen::serialize_question_bank(bank));
    CHECK(back.set_a == bank.set_a);
    CHECK(back.set_c == bank.set_c);
    CHECK_THROWS(qagen::parse_question_bank(R"({"set_a": ["x"], "set_j": ["y"]})"));
    CHECK_THROWS(qagen::parse_question_bank(R"({"set_a": ["x"], "set_j": ["y"], "set_c": []})"));
    CHECK_THROWS(qagen::parse_question_bank("not json"));
}

TEST_CASE("bounded draws are uniform enough and stay in range") {
    qagen::SeededSampler s(123);
    std::vector<int> hist(11, 0);
    const int n = 110000;
    for (int i = 0; i < n; ++i) {
        const auto v = s.below(11);
        REQUIRE(v < 11);
        ++hist[v];
    }
    // 10000 expected per bucket; 5 sigma is about 475.
    for (int h : hist) CHECK(std::abs(h - 10000) < 500);
    CHECK_THROWS_AS(s.below(0), RangeError);
}

TEST_CASE("mt19937_64 reference value anchors cross-platform determinism") {
    // The standard fixes the 10000th output for the default seed.
    std::mt19937_64 e;
    e.discard(9999);
    CHECK(e() == 9981545732273789042ULL);
}

TEST_CASE("per-clip samplers do not depend on visiting order") {
    auto a = qagen::SeededSampler::for_clip(7, "clip_1");
    auto b = qagen::SeededSampler::for_clip(7, "clip_1");
    auto c = qagen::SeededSampler::for_clip(7, "clip_2");
    auto d = qagen::SeededSampler::for_clip(8, "clip_1");
    CHECK(a.seed() == b.seed());
    CHECK(a.seed() != c.seed());
    CHECK(a.seed() != d.seed());
    CHECK(qagen::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(qagen::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("fixed samples have three rounds drawn from the right sets") {
    const auto corpus = corpus_of(60);
    const auto bank = qagen::default_question_bank();
    const auto samples = qagen::generate_fixed_dataset(corpus, bank, 7);
    REQUIRE(samples.size() == 60);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const auto& r = corpus.entries[i].record;
        CHECK(check_sample(s).empty());
        CHECK(s.sample_id == r.clip_id + "#fixed");
        CHECK(s.kind == SampleKind::fixed_qa);
        REQUIRE(s.turns.size() == 6);
        CHECK(member(bank.set_a, s.turns[0].text));
        CHECK(s.turns[1].text == r.description);
        CHECK(member(bank.set_j, s.turns[2].text));
        CHECK(s.turns[3].text == r.justification);
        CHECK(member(bank.set_c, s.turns[4].text));
        const auto target = corpus::control_target(r);
        CHECK(codec::parse_control_answer(s.turns[5].text) == target.value);
        CHECK(s.control_target == target.source);
        CHECK(s.context == codec::render_system_context(r));
    }
}

TEST_CASE("same seed gives identical datasets, different seeds differ") {
    const auto corpus = corpus_of(40);
    const auto bank = qagen::default_question_bank();
    const auto a = io::serialize_samples(qagen::generate_fixed_dataset(corpus, bank, 7));
    const auto b = io::serialize_samples(qagen::generate_fixed_dataset(corpus, bank, 7));
    const auto c = io::serialize_samples(qagen::generate_fixed_dataset(corpus, bank, 8));
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("a clip's questions survive reordering the corpus") {
    auto corpus = corpus_of(20);
    const auto bank = qagen::default_question_bank();
    const auto forward = qagen::generate_fixed_dataset(corpus, bank, 3);
    std::reverse(corpus.entries.begin(), corpus.entries.end());
    const auto backward = qagen::generate_fixed_dataset(corpus, bank, 3);
    for (std::size_t i = 0; i < forward.size(); ++i) CHECK(forward[i] == backward[forward.size() - 1 - i]);
}

TEST_CASE("all questions of a set get used across a corpus") {
    const auto corpus = corpus_of(400);
    const auto bank = qagen::default_question_bank();
    std::set<std::string> used;
    for (const auto& s : qagen::generate_fixed_dataset(corpus, bank, 1)) used.insert(s.turns[4].text);
    CHECK(used.size() == 11);
}

TEST_CASE("dataset lines follow the conversation layout") {
    const auto corpus = corpus_of(1);
    const auto s = qagen::generate_fixed_dataset(corpus, qagen::default_question_bank(), 1)[0];
    const auto j = io::sample_to_json(s);
    CHECK(j.at("kind") == "fixed_qa");
    CHECK(j.at("conversations").size() == 6);
    CHECK(j.at("conversations")[0].at("from") == "human");
    CHECK(j.at("conversations")[1].at("from") == "gpt");
    CHECK(io::sample_from_json(j) == s);
}
