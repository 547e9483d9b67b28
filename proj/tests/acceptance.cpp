// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "drivekit/cli.hpp"
#include "drivekit/codec.hpp"
#include "drivekit/convgen.hpp"
#include "drivekit/corpus.hpp"
#include "drivekit/judge.hpp"
#include "drivekit/metrics.hpp"
#include "drivekit/tokmath.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "stub_server.hpp"

using namespace drivekit;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Failure {
    std::string what;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure{what};
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t count_lines(const std::string& path) {
    const auto text = fixtures::slurp(path);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::string write_stub_config(const fixtures::TempDir& dir, const std::string& url, const std::string& cache) {
    const auto path = dir / "config.json";
    fixtures::spit(path, json{{"chat", {{"url", url}, {"cache_dir", cache}, {"backoff_ms", 1}}}}.dump());
    return path;
}

std::string write_predictions(const fixtures::TempDir& dir, const std::vector<ClipRecord>& records) {
    std::string text;
    for (const auto& r : records) {
        text += json{{"clip_id", r.clip_id},
                     {"description", "The car moves forward."},
                     {"justification", r.justification},
                     {"control", codec::format_control_answer(corpus::control_target(r).value)}}
                    .dump() +
                "\n";
    }
    const auto path = dir / "predictions.jsonl";
    fixtures::spit(path, text);
    return path;
}

// Criterion 1: fixed-question generation over 100 clips finishes in under 5 s.
void fixed_generation() {
    fixtures::TempDir dir("acc1");
    const auto files = fixtures::write_corpus(dir, 100);
    const auto out = dir / "fixed.jsonl";
    const auto t0 = Clock::now();
    expect(cli::run({"gen-fixed", "--annotations", files.annotations, "--seed", "1", "--out", out}) == 0,
           "gen-fixed failed");
    const double elapsed = seconds_since(t0);
    expect(count_lines(out) == 100, "expected 100 samples");
    expect(elapsed < 5.0, "took " + std::to_string(elapsed) + " s");
}

// Criterion 2: one fixed sample per clip and round(0.72 N) conversations, within 1 per 100 clips.
void dataset_composition() {
    fixtures::TempDir dir("acc2");
    fixtures::StubChatServer server;
    const std::size_t n = 300;
    const auto files = fixtures::write_corpus(dir, n);
    const auto out = dir / "dataset.jsonl";
    expect(cli::run({"build-dataset", "--config", write_stub_config(dir, server.url(), dir / "cache"), "--annotations",
                     files.annotations, "--detections", files.detections, "--ratio", "0.72", "--out", out}) == 0,
           "build-dataset failed");
    std::size_t fixed = 0, conv = 0;
    std::ifstream in(out);
    for (std::string line; std::getline(in, line);) {
        (json::parse(line).at("kind") == "fixed_qa" ? fixed : conv) += 1;
    }
    const double expected = std::round(0.72 * static_cast<double>(n));
    expect(fixed == n, "fixed samples " + std::to_string(fixed));
    expect(std::abs(static_cast<double>(conv) - expected) <= static_cast<double>(n) / 100.0,
           "conversation samples " + std::to_string(conv) + ", expected about " + std::to_string(expected));
    const auto counts = json::parse(fixtures::slurp(out + ".manifest.json")).at("counts");
    expect(counts.at("fixed") == fixed && counts.at("conversation") == conv, "manifest counts disagree");
}

// Criterion 3: control strings round-trip and the reference forms render exactly, fast.
void control_codec() {
    const auto t0 = Clock::now();
    expect(codec::format_control_answer({2.09, 0.0}) == "Speed: 2.09; Turning angle: 0.0", "first reference form");
    expect(codec::format_control_answer({5.5, 20.04}) == "Speed: 5.5; Turning angle: 20.04", "second reference form");
    expect(codec::parse_control_answer("Speed: 5.5; Turning angle: 20.04") == ControlEstimate{5.5, 20.04},
           "reference form parse");
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 10000; ++i) {
        const ControlEstimate v{fixtures::centi(rng, 0, 4000), fixtures::centi(rng, -18000, 18000)};
        const auto text = codec::format_control_answer(v);
        if (!(codec::parse_control_answer(text) == v)) throw Failure{"round trip broke on " + text};
    }
    const double elapsed = seconds_since(t0);
    expect(elapsed < 1.0, "took " + std::to_string(elapsed) + " s");
}

metrics::Tokens random_sentence(std::mt19937_64& rng) {
    static const char* kWords[] = {"the", "car", "stops", "turns", "left", "right", "a", "light", "red"};
    metrics::Tokens t(rng() % 14 + 1);
    for (auto& w : t) w = kWords[rng() % 9];
    return t;
}

// Criterion 4: BLEU-4, CIDEr-D and RMSE agree with independent re-derivations.
void metric_oracles() {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t items = 2 + rng() % 8;
        std::vector<metrics::Tokens> hyps;
        std::vector<std::vector<metrics::Tokens>> refs;
        for (std::size_t i = 0; i < items; ++i) {
            hyps.push_back(random_sentence(rng));
            std::vector<metrics::Tokens> set;
            for (std::size_t r = 0; r < 1 + rng() % 3; ++r) set.push_back(rng() % 2 ? hyps.back() : random_sentence(rng));
            refs.push_back(set);
        }
        const double b = oracle::corpus_bleu(hyps, refs);
        expect(std::abs(metrics::corpus_bleu4(hyps, refs) - b) <= 1e-9 * std::max(1.0, b), "BLEU-4 disagrees");
        const auto c = oracle::cider(hyps, refs);
        const auto got = metrics::cider_d_scores(hyps, refs);
        for (std::size_t i = 0; i < items; ++i) {
            expect(std::abs(got[i] - c[i]) <= 1e-6 * std::max(1.0, std::abs(c[i])), "CIDEr-D disagrees");
        }
    }
    std::uniform_real_distribution<double> value(-40.0, 40.0);
    for (int trial = 0; trial < 300; ++trial) {
        metrics::ControlSeries s;
        std::vector<double> p, g;
        for (std::size_t i = 0; i < 1 + rng() % 40; ++i) {
            s.predictions.push_back({value(rng), 0.0});
            s.ground_truth.push_back({value(rng), 0.0});
            p.push_back(s.predictions.back().speed);
            g.push_back(s.ground_truth.back().speed);
        }
        const double e = oracle::rmse(p, g);
        expect(std::abs(metrics::control_rmse(s) - e) <= 1e-12 * std::max(1.0, e), "RMSE disagrees");
    }
}

// Criterion 5: threshold accuracy uses strict inequality and never drops as tau grows.
void threshold_accuracy() {
    metrics::ControlSeries s;
    for (double e : {0.05, 0.3, 0.8, 3.0, 7.0}) {
        s.predictions.push_back({e, 0.0});
        s.ground_truth.push_back({0.0, 0.0});
    }
    const double want[] = {20.0, 40.0, 60.0, 80.0};
    for (std::size_t i = 0; i < metrics::kDefaultTaus.size(); ++i) {
        expect(metrics::threshold_accuracy(s, metrics::kDefaultTaus[i]) == want[i], "A_tau hand values");
    }
    metrics::ControlSeries edge;
    edge.predictions = {{0.5, 0.0}};
    edge.ground_truth = {{0.0, 0.0}};
    expect(metrics::threshold_accuracy(edge, 0.5) == 0.0, "an error equal to tau must not count");

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> value(-10.0, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        metrics::ControlSeries r;
        r.channel = metrics::Channel::angle;
        for (int i = 0; i < 30; ++i) {
            r.predictions.push_back({0.0, value(rng)});
            r.ground_truth.push_back({0.0, value(rng)});
        }
        double last = -1.0;
        for (double tau = 0.05; tau < 25.0; tau *= 1.3) {
            const double a = metrics::threshold_accuracy(r, tau);
            expect(a >= last, "A_tau decreased");
            last = a;
        }
    }
}

// Criterion 6: both prompt templates render byte-identical to hand-built snapshots.
void golden_prompts() {
    std::ifstream ann(GOLDEN_DIR "/annotations.jsonl");
    std::ifstream det(GOLDEN_DIR "/detections.jsonl");
    const auto corpus = corpus::join_corpus(corpus::parse_clip_annotations(ann), corpus::parse_detections(det));
    const auto& clip = corpus.entries.at(1);
    expect(convgen::render_conversation_prompt(clip.record, clip.detections) ==
               fixtures::slurp(GOLDEN_DIR "/conversation_prompt.txt"),
           "conversation prompt differs");
    expect(judge::render_judge_prompt("The car slows down to a stop.", "The car is slowing down") ==
               fixtures::slurp(GOLDEN_DIR "/judge_prompt.txt"),
           "judge prompt differs");
}

// Criterion 7: token shapes, permutation behaviour and the projection oracle.
void token_math() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss;
    auto random = [&](Eigen::Index r, Eigen::Index c) {
        tokmath::Matrix m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
        return m;
    };
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 12);
        const Eigen::Index d_text = 1 + static_cast<Eigen::Index>(rng() % 12);
        std::vector<tokmath::FrameFeature> frames;
        for (int i = 0; i < 8; ++i) frames.push_back(random(tokmath::kFrameRows, d));
        std::vector<std::size_t> perm(8);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<tokmath::FrameFeature> shuffled;
        for (auto p : perm) shuffled.push_back(frames[p]);

        const auto t = tokmath::temporal_feature(frames);
        const auto s = tokmath::spatial_feature(frames);
        expect(tokmath::spatial_feature(shuffled).isApprox(s, 1e-12), "spatial feature not order invariant");
        const auto ts = tokmath::temporal_feature(shuffled);
        for (int k = 0; k < 8; ++k) {
            expect(ts.row(k) == t.row(static_cast<Eigen::Index>(perm[k])), "temporal feature not equivariant");
        }

        const tokmath::ProjectorWeights w{random(d, d_text), random(d_text, 1).col(0)};
        const auto out = tokmath::project_tokens(t, s, w);
        expect(out.rows() == 264 && out.cols() == d_text, "token shape");
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            for (Eigen::Index c = 0; c < d_text; ++c) {
                double acc = w.bias(c);
                for (Eigen::Index k = 0; k < d; ++k) acc += (r < 8 ? t(r, k) : s(r - 8, k)) * w.weight(k, c);
                expect(std::abs(out(r, c) - acc) <= 1e-10, "projection disagrees with the loop oracle");
            }
        }
    }
}

// Criterion 8: a second run against a warm cache makes no calls and writes identical files.
void warm_cache() {
    fixtures::TempDir dir("acc8");
    fixtures::StubChatServer server;
    const auto files = fixtures::write_corpus(dir, 30);
    const auto preds = write_predictions(dir, files.records);
    const auto config = write_stub_config(dir, server.url(), dir / "cache");

    auto run_both = [&](const std::string& tag) {
        const auto dataset = dir / ("dataset-" + tag + ".jsonl");
        const auto judged = dir / ("judge-" + tag + ".json");
        expect(cli::run({"build-dataset", "--config", config, "--annotations", files.annotations, "--detections",
                         files.detections, "--out", dataset}) == 0,
               "build-dataset failed");
        expect(cli::run({"eval-judge", "--config", config, "--annotations", files.annotations, "--predictions", preds,
                         "--out", judged}) == 0,
               "eval-judge failed");
        return std::pair{fixtures::slurp(dataset), fixtures::slurp(judged)};
    };

    const auto cold = run_both("cold");
    const int cold_calls = server.calls();
    expect(cold_calls > 0, "cold run made no calls");
    const auto warm = run_both("warm");
    expect(server.calls() == cold_calls, "warm run made " + std::to_string(server.calls() - cold_calls) + " calls");
    expect(warm.first == cold.first, "dataset differs between runs");
    expect(warm.second == cold.second, "judge report differs between runs");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
        {"fixed-question generation over 100 clips under 5 s", fixed_generation},
        {"dataset holds N fixed and round(0.72 N) conversation samples", dataset_composition},
        {"control answers format and round-trip, 10k pairs under 1 s", control_codec},
        {"BLEU-4, CIDEr-D and RMSE match independent oracles", metric_oracles},
        {"threshold accuracy is strict and monotone in tau", threshold_accuracy},
        {"prompt templates match golden snapshots", golden_prompts},
        {"token shapes, permutation properties and projection oracle", token_math},
        {"warm cache gives zero calls and identical outputs", warm_cache},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::string detail;
        try {
            criteria[i].second();
        } catch (const Failure& f) {
            detail = f.what;
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::cout << (detail.empty() ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first;
        if (!detail.empty()) std::cout << " (" << detail << ")";
        std::cout << "\n";
        if (!detail.empty()) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
