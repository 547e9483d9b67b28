#include <doctest.h>

#include <fstream>
#include <set>

#include "drivekit/convgen.hpp"
#include "drivekit/corpus.hpp"
#include "drivekit/errors.hpp"
#include "drivekit/io.hpp"
#include "fixtures.hpp"
#include "stub_server.hpp"

using namespace drivekit;
using namespace std::chrono_literals;

namespace {

CorpusEntry golden_clip() {
    std::ifstream ann(GOLDEN_DIR "/annotations.jsonl");
    std::ifstream det(GOLDEN_DIR "/detections.jsonl");
    auto corpus = corpus::join_corpus(corpus::parse_clip_annotations(ann), corpus::parse_detections(det));
    return corpus.entries.at(1);
}

// The three rounds shown for the example clip, tags as printed.
const char* kExampleConversation =
    "User: What objects are present in the video, and how do they change throughout the frames?\n"
    "\n"
    "AI: The video features various objects, including cars, a truck, and a traffic light. As the video "
    "progresses, the positions and visibility of these objects change. In the initial frames, there are multiple "
    "cars and a truck. As the ego vehicle turns right, the surrounding cars and truck gradually disappear from view. "
    "Towards the end of the video, a traffic light becomes visible.\n"
    "\n"
    "User: How does the ego vehicle maneuver in the video?\n"
    "\n"
    "AI: The ego vehicle starts driving straight and then makes a right turn. As the road becomes clear for turning, "
    "the ego vehicle accelerates and completes the turn safely.\n"
    "\n"
    "User: What can we learn from the ego vehicle's interactions with the traffic and surrounding environment in "
    "this video?\n"
    "\n"
    "AI: The ego vehicle's interactions with the traffic and surrounding environment demonstrate the importance of "
    "safe driving practices.";

chat::EndpointConfig stub_config(const std::string& url) {
    chat::EndpointConfig c;
    c.url = url;
    c.backoff = 1ms;
    c.max_attempts = 2;
    return c;
}

}  // namespace

TEST_CASE("conversation prompt matches the golden snapshot byte for byte") {
    const auto clip = golden_clip();
    const auto golden = fixtures::slurp(GOLDEN_DIR "/conversation_prompt.txt");
    CHECK(convgen::render_conversation_prompt(clip.record, clip.detections) == golden);
}

TEST_CASE("object lines render shortest decimals and empty frames") {
    const auto clip = golden_clip();
    const auto objects = convgen::render_objects(clip.detections);
    CHECK(objects.find("Frame 0: car:[0.298, 0.408, 0.572, 0.756], car:[0.924, 0.408, 1.0, 0.51],") == 0);
    CHECK(objects.find("\nFrame 5:\nFrame 6:\n") != std::string::npos);
    CHECK(convgen::render_objects(corpus::empty_detections("x")) ==
          "Frame 0:\nFrame 1:\nFrame 2:\nFrame 3:\nFrame 4:\nFrame 5:\nFrame 6:\nFrame 7:");
}

TEST_CASE("captions drop the trailing period the template supplies") {
    auto r = golden_clip().record;
    CHECK(convgen::render_captions(r) == "The car turns right As the road is clear to turn");
    r.description = "The car stops...";
    r.justification = "  because it is red.  ";
    CHECK(convgen::render_captions(r) == "The car stops because it is red");
}

TEST_CASE("the reference example conversation parses into three rounds") {
    const auto d = convgen::parse_conversation(kExampleConversation);
    REQUIRE(d.accepted);
    REQUIRE(d.turns.size() == 6);
    CHECK(d.turns[0].speaker == Speaker::human);
    CHECK(d.turns[1].speaker == Speaker::assistant);
    CHECK(d.turns[2].text == "How does the ego vehicle maneuver in the video?");
    CHECK(d.turns[5].text.find("safe driving practices.") != std::string::npos);
    CHECK(d.warnings.empty());
}

TEST_CASE("speaker tag variants") {
    const auto d = convgen::parse_conversation(
        "Sure! Here is the conversation:\n"
        "**User:** first question?\n**AI:** first answer\ncontinues here\n"
        "Human: second?\nAssistant: second answer\n"
        "### user : third?\n- ai: third answer\n");
    REQUIRE(d.accepted);
    CHECK(d.turns[0].text == "first question?");
    CHECK(d.turns[1].text == "first answer\ncontinues here");
    CHECK(d.turns[4].text == "third?");
    REQUIRE(d.warnings.size() == 1);
    CHECK(d.warnings[0].find("before the first speaker tag") != std::string::npos);
}

TEST_CASE("rejection reasons") {
    CHECK(convgen::parse_conversation("   \n").rejection == "empty");
    CHECK(convgen::parse_conversation("Just some prose.").rejection == "no_speaker_tags");
    CHECK(convgen::parse_conversation("AI: hi\nUser: q").rejection == "non_alternating_at_turn=0");
    CHECK(convgen::parse_conversation("User: a\nUser: b").rejection == "non_alternating_at_turn=1");
    CHECK(convgen::parse_conversation("User: a\nAI:\nUser: b\nAI: c").rejection == "empty_turn=1");
    CHECK(convgen::parse_conversation("User: a\nAI: b\nUser: c").rejection == "unanswered_question");
    CHECK(convgen::parse_conversation("User: a\nAI: b\nUser: c\nAI: d").rejection == "round_count=2");
    CHECK_FALSE(convgen::parse_conversation("User: a\nAI: b").accepted);
}

TEST_CASE("leak checks flag privileged numbers") {
    const auto clip = golden_clip();
    const auto info = convgen::privileged_info(clip.record, clip.detections);
    auto warnings_for = [&](const std::string& text) {
        return convgen::validate_conversation(convgen::parse_conversation(text), info);
    };
    CHECK(warnings_for(kExampleConversation).empty());

    auto w = warnings_for("User: Why is the speed 3.91 at first?\nAI: a\nUser: b\nAI: c\nUser: d\nAI: e");
    REQUIRE(w.size() == 1);
    CHECK(w[0].find("question_leak") == 0);
    CHECK(w[0].find("speed") != std::string::npos);

    w = warnings_for("User: a\nAI: The car at [0.298, 0.408, 0.572, 0.756] turns.\nUser: b\nAI: c\nUser: d\nAI: e");
    CHECK(std::count_if(w.begin(), w.end(), [](const auto& s) { return s.find("box_leak") == 0; }) == 1);
    CHECK(std::count_if(w.begin(), w.end(), [](const auto& s) { return s.find("box_coordinate_leak") == 0; }) == 4);

    // Answers may mention speeds; only questions are held to the rule.
    CHECK(warnings_for("User: a\nAI: It drives at 3.91 m/s.\nUser: b\nAI: c\nUser: d\nAI: e").empty());
}

TEST_CASE("clip selection is seeded, sized by the ratio and sorted") {
    const auto a = convgen::select_clips(1000, 0.72, 5);
    CHECK(a.size() == 720);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == a.size());
    CHECK(a.back() < 1000);
    CHECK(a == convgen::select_clips(1000, 0.72, 5));
    CHECK(a != convgen::select_clips(1000, 0.72, 6));
    CHECK(convgen::select_clips(16803, 0.72, 1).size() == 12098);
    CHECK(convgen::select_clips(10, 0.0, 1).empty());
    CHECK(convgen::select_clips(10, 1.0, 1).size() == 10);
    CHECK_THROWS_AS(convgen::select_clips(10, 1.5, 1), ConfigError);
}

TEST_CASE("clip selection is roughly uniform over positions") {
    std::vector<int> hits(100, 0);
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        for (auto i : convgen::select_clips(100, 0.5, seed)) ++hits[i];
    }
    // Each position is picked with probability 1/2: 1000 +- 5 sigma (112).
    for (int h : hits) CHECK(std::abs(h - 1000) < 112);
}

TEST_CASE("generation against the stub accepts, skips and keeps corpus order") {
    fixtures::StubChatServer server;
    chat::ChatClient client(stub_config(server.url()));
    const auto corpus = corpus::join_corpus(fixtures::synthetic_records(50, 2), {});
    convgen::ConvGenConfig cfg;
    const auto build = convgen::generate_conversations(corpus, client, cfg, 9);

    CHECK(build.accepted == 36);
    CHECK(build.skipped == 14);
    CHECK(build.samples.size() == 36);
    CHECK(build.manifest.size() == 50);
    CHECK(server.calls() == 36);
    const auto selected = convgen::select_clips(50, 0.72, 9);
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const auto& s = build.samples[i];
        CHECK(s.clip_id == corpus.entries[selected[i]].record.clip_id);
        CHECK(s.sample_id == s.clip_id + "#conv");
        CHECK(s.kind == SampleKind::conversation);
        CHECK(check_sample(s).empty());
        CHECK(build.manifest[selected[i]].outcome == "accepted");
        CHECK(build.manifest[selected[i]].attempts == 1);
    }
}

TEST_CASE("a malformed reply is retried once with a nudge") {
    std::atomic<int> with_history{0};
    fixtures::StubChatServer server([&](const nlohmann::json& req, int) {
        if (req.at("messages").size() == 1) return fixtures::StubChatServer::Reply{200, "User: only one\nAI: turn"};
        ++with_history;
        CHECK(req.at("messages")[1].at("role") == "assistant");
        return fixtures::StubChatServer::Reply{200, fixtures::StubChatServer::kConversation};
    });
    chat::ChatClient client(stub_config(server.url()));
    const auto corpus = corpus::join_corpus(fixtures::synthetic_records(4, 2), {});
    convgen::ConvGenConfig cfg;
    cfg.ratio = 1.0;
    const auto build = convgen::generate_conversations(corpus, client, cfg, 1);
    CHECK(build.accepted == 4);
    CHECK(with_history == 4);
    for (const auto& m : build.manifest) CHECK(m.attempts == 2);

    cfg.retry_rejected = false;
    fixtures::StubChatServer bad([](const nlohmann::json&, int) {
        return fixtures::StubChatServer::Reply{200, "no tags at all"};
    });
    chat::ChatClient bad_client(stub_config(bad.url()));
    const auto rejected = convgen::generate_conversations(corpus, bad_client, cfg, 1);
    CHECK(rejected.rejected == 4);
    CHECK(rejected.samples.empty());
    CHECK(rejected.manifest[0].reason == "no_speaker_tags");
}

TEST_CASE("service failures become per-clip errors") {
    fixtures::StubChatServer server([](const nlohmann::json&, int) {
        return fixtures::StubChatServer::Reply{401, "no key"};
    });
    chat::ChatClient client(stub_config(server.url()));
    const auto corpus = corpus::join_corpus(fixtures::synthetic_records(3, 2), {});
    convgen::ConvGenConfig cfg;
    cfg.ratio = 1.0;
    const auto build = convgen::generate_conversations(corpus, client, cfg, 1);
    CHECK(build.errors == 3);
    CHECK(build.manifest[0].reason.find("service_error") == 0);
}

TEST_CASE("leaky conversations can be dropped") {
    const char* leaky = "User: Is it going 12.5 m/s?\nAI: a\nUser: b\nAI: c\nUser: d\nAI: e";
    fixtures::StubChatServer server([&](const nlohmann::json&, int) {
        return fixtures::StubChatServer::Reply{200, leaky};
    });
    chat::ChatClient client(stub_config(server.url()));
    auto records = fixtures::synthetic_records(1, 2);
    records[0].speeds[3] = 12.5;
    const auto corpus = corpus::join_corpus(records, {});
    convgen::ConvGenConfig cfg;
    cfg.ratio = 1.0;
    auto build = convgen::generate_conversations(corpus, client, cfg, 1);
    CHECK(build.accepted == 1);
    CHECK_FALSE(build.manifest[0].warnings.empty());

    cfg.drop_on_leak = true;
    build = convgen::generate_conversations(corpus, client, cfg, 1);
    CHECK(build.rejected == 1);
    CHECK(build.manifest[0].reason == "privileged_leak");
}

TEST_CASE("build manifest lines") {
    const std::vector<convgen::ManifestEntry> m = {{"c1", "accepted", "", 1, {"w"}},
                                                   {"c2", "skipped", "not selected", 0, {}}};
    const auto text = convgen::serialize_manifest(m);
    CHECK(text ==
          "{\"attempts\":1,\"clip_id\":\"c1\",\"outcome\":\"accepted\",\"reason\":\"\",\"warnings\":[\"w\"]}\n"
          "{\"attempts\":0,\"clip_id\":\"c2\",\"outcome\":\"skipped\",\"reason\":\"not selected\",\"warnings\":[]}\n");
}
