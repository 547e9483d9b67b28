#include "drivekit/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drivekit/chatclient.hpp"
#include "drivekit/codec.hpp"
#include "drivekit/convgen.hpp"
#include "drivekit/corpus.hpp"
#include "drivekit/errors.hpp"
#include "drivekit/io.hpp"
#include "drivekit/judge.hpp"
#include "drivekit/metrics.hpp"
#include "drivekit/qagen.hpp"
#include "drivekit/tokmath.hpp"

namespace drivekit::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Everything a run can be configured with. Paths are not part of the config
// hash: inputs are identified by content digest instead, so the same data in
// another directory yields the same manifest.
struct RunConfig {
    std::string annotations;
    std::string detections;
    std::string questions;
    std::string predictions;
    std::string judge_report;
    std::string features;
    std::string projector;
    std::string out;

    std::uint64_t seed = 0;
    std::string split = "all";
    double ratio = 0.72;
    std::vector<double> taus = metrics::kDefaultTaus;
    std::size_t workers = 4;

    chat::EndpointConfig endpoint;
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_tokens = 1024;
    int judge_max_tokens = 256;

    bool retry_rejected = true;
    bool drop_on_leak = false;
};

template <typename T>
T take(const json& obj, const char* key, const T& fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& item : obj.items()) {
        if (!known.count(item.key())) throw ConfigError("unknown config key '" + where + item.key() + "'");
    }
}

void apply_config_file(RunConfig& cfg, const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    reject_unknown(j,
                   {"annotations", "detections", "questions", "predictions", "judge_report", "features", "projector",
                    "out", "seed", "split", "ratio", "taus", "workers", "chat", "convgen"},
                   "");
    cfg.annotations = take(j, "annotations", cfg.annotations);
    cfg.detections = take(j, "detections", cfg.detections);
    cfg.questions = take(j, "questions", cfg.questions);
    cfg.predictions = take(j, "predictions", cfg.predictions);
    cfg.judge_report = take(j, "judge_report", cfg.judge_report);
    cfg.features = take(j, "features", cfg.features);
    cfg.projector = take(j, "projector", cfg.projector);
    cfg.out = take(j, "out", cfg.out);
    cfg.seed = take(j, "seed", cfg.seed);
    cfg.split = take(j, "split", cfg.split);
    cfg.ratio = take(j, "ratio", cfg.ratio);
    cfg.taus = take(j, "taus", cfg.taus);
    cfg.workers = take(j, "workers", cfg.workers);

    if (auto it = j.find("chat"); it != j.end()) {
        const json& c = *it;
        reject_unknown(c,
                       {"url", "model", "temperature", "max_tokens", "judge_max_tokens", "auth_env", "cache_dir",
                        "max_attempts", "backoff_ms", "timeout_ms", "parallelism"},
                       "chat.");
        auto& ep = cfg.endpoint;
        ep.url = take(c, "url", ep.url);
        ep.auth_env = take(c, "auth_env", ep.auth_env);
        ep.cache_dir = take(c, "cache_dir", ep.cache_dir.string());
        ep.max_attempts = take(c, "max_attempts", ep.max_attempts);
        ep.backoff = std::chrono::milliseconds(take(c, "backoff_ms", static_cast<long>(ep.backoff.count())));
        ep.timeout = std::chrono::milliseconds(take(c, "timeout_ms", static_cast<long>(ep.timeout.count())));
        ep.parallelism = take(c, "parallelism", ep.parallelism);
        cfg.model = take(c, "model", cfg.model);
        cfg.temperature = take(c, "temperature", cfg.temperature);
        cfg.max_tokens = take(c, "max_tokens", cfg.max_tokens);
        cfg.judge_max_tokens = take(c, "judge_max_tokens", cfg.judge_max_tokens);
    }
    if (auto it = j.find("convgen"); it != j.end()) {
        reject_unknown(*it, {"retry_rejected", "drop_on_leak"}, "convgen.");
        cfg.retry_rejected = take(*it, "retry_rejected", cfg.retry_rejected);
        cfg.drop_on_leak = take(*it, "drop_on_leak", cfg.drop_on_leak);
    }
}

void check_config(const RunConfig& cfg) {
    metrics::validate_taus(cfg.taus);
    if (!(cfg.ratio >= 0.0 && cfg.ratio <= 1.0)) throw ConfigError("ratio must lie in [0, 1]");
    if (cfg.split != "all" && cfg.split != "train" && cfg.split != "test") {
        throw ConfigError("split must be one of all, train, test");
    }
    if (cfg.workers == 0) throw ConfigError("workers must be positive");
    if (cfg.endpoint.max_attempts < 1) throw ConfigError("chat.max_attempts must be at least 1");
    if (cfg.temperature < 0.0) throw ConfigError("chat.temperature must be non-negative");
}

// The settings that can change an output's bytes.
json config_fingerprint(const RunConfig& cfg) {
    return {
        {"seed", cfg.seed},
        {"split", cfg.split},
        {"ratio", cfg.ratio},
        {"taus", cfg.taus},
        {"model", cfg.model},
        {"temperature", cfg.temperature},
        {"max_tokens", cfg.max_tokens},
        {"judge_max_tokens", cfg.judge_max_tokens},
        {"retry_rejected", cfg.retry_rejected},
        {"drop_on_leak", cfg.drop_on_leak},
        {"sampler", qagen::SeededSampler::kAlgorithm},
    };
}

// --- flags -----------------------------------------------------------------

// One value shared by every subcommand that accepts the flag; only the
// parsed subcommand's options can have a count.
template <typename T>
struct Flag {
    T value{};
    std::vector<CLI::Option*> options;
    bool given() const {
        return std::any_of(options.begin(), options.end(), [](const CLI::Option* o) { return o->count() > 0; });
    }
};

struct Flags {
    std::string config;
    Flag<std::string> annotations, detections, questions, predictions, judge_report, features, projector, out;
    Flag<std::uint64_t> seed;
    Flag<std::string> split;
    Flag<double> ratio;
    Flag<std::vector<double>> taus;
    Flag<std::size_t> workers;
    Flag<std::string> url, model, cache_dir, auth_env;
    Flag<double> temperature;
    Flag<int> max_tokens, max_attempts;
};

template <typename T>
CLI::Option* add(CLI::App* app, Flag<T>& flag, const std::string& name, const std::string& help) {
    return flag.options.emplace_back(app->add_option(name, flag.value, help));
}

template <typename T>
void override_with(T& target, const Flag<T>& flag) {
    if (flag.given()) target = flag.value;
}

RunConfig resolve(const Flags& f) {
    RunConfig cfg;
    if (!f.config.empty()) apply_config_file(cfg, f.config);
    override_with(cfg.annotations, f.annotations);
    override_with(cfg.detections, f.detections);
    override_with(cfg.questions, f.questions);
    override_with(cfg.predictions, f.predictions);
    override_with(cfg.judge_report, f.judge_report);
    override_with(cfg.features, f.features);
    override_with(cfg.projector, f.projector);
    override_with(cfg.out, f.out);
    override_with(cfg.seed, f.seed);
    override_with(cfg.split, f.split);
    override_with(cfg.ratio, f.ratio);
    override_with(cfg.taus, f.taus);
    override_with(cfg.workers, f.workers);
    override_with(cfg.endpoint.url, f.url);
    override_with(cfg.endpoint.auth_env, f.auth_env);
    if (f.cache_dir.given()) cfg.endpoint.cache_dir = f.cache_dir.value;
    override_with(cfg.endpoint.max_attempts, f.max_attempts);
    override_with(cfg.model, f.model);
    override_with(cfg.temperature, f.temperature);
    override_with(cfg.max_tokens, f.max_tokens);
    check_config(cfg);
    return cfg;
}

// --- run bookkeeping -------------------------------------------------------

class Run {
public:
    Run(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

    void input(const std::string& role, const std::string& path) {
        inputs_[role] = io::file_sha256(path);
    }

    void output(const std::string& role, const fs::path& path, std::string_view contents) {
        io::write_file_atomic(path, contents);
        outputs_[role] = {{"file", path.filename().string()}, {"sha256", io::sha256_hex(contents)}};
    }

    // For outputs produced by a dedicated writer.
    void written(const std::string& role, const fs::path& path) {
        outputs_[role] = {{"file", path.filename().string()}, {"sha256", io::file_sha256(path)}};
    }

    json& counts() { return counts_; }

    // Written last, next to the primary output.
    void finish() {
        const json fingerprint = config_fingerprint(cfg_);
        json manifest = {
            {"command", command_},
            {"config", fingerprint},
            {"config_sha256", io::sha256_hex(fingerprint.dump())},
            {"seed", cfg_.seed},
            {"inputs", inputs_},
            {"outputs", outputs_},
            {"counts", counts_},
        };
        io::write_file_atomic(cfg_.out + ".manifest.json", manifest.dump(2) + "\n");
        std::error_code ignored;
        fs::remove(cfg_.out + ".error.json", ignored);
    }

private:
    std::string command_;
    const RunConfig& cfg_;
    json inputs_ = json::object();
    json outputs_ = json::object();
    json counts_ = json::object();
};

void require(const std::string& value, const char* what) {
    if (value.empty()) throw ConfigError(std::string("missing required setting '") + what + "'");
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

Corpus load_corpus(const RunConfig& cfg, Run& run) {
    require(cfg.annotations, "annotations");
    auto ann = open_input(cfg.annotations);
    auto records = corpus::parse_clip_annotations(ann);
    run.input("annotations", cfg.annotations);

    std::map<std::string, DetectionSet> detections;
    if (!cfg.detections.empty()) {
        auto det = open_input(cfg.detections);
        detections = corpus::parse_detections(det);
        run.input("detections", cfg.detections);
    }
    if (cfg.split != "all") {
        std::erase_if(records, [&](const ClipRecord& r) { return cfg.split != to_string(r.split); });
    }
    return corpus::join_corpus(std::move(records), detections);
}

qagen::QuestionBank load_questions(const RunConfig& cfg, Run& run) {
    if (cfg.questions.empty()) return qagen::default_question_bank();
    run.input("questions", cfg.questions);
    return qagen::parse_question_bank(io::read_file(cfg.questions));
}

chat::EndpointConfig endpoint_for(const RunConfig& cfg) {
    chat::EndpointConfig ep = cfg.endpoint;
    if (ep.parallelism == 0) ep.parallelism = cfg.workers;
    return ep;
}

void log_client(const chat::ChatClient& client) {
    std::cerr << "chat: " << client.network_calls() << " network calls, " << client.cache_hits() << " cache hits\n";
}

convgen::ConvGenConfig convgen_config(const RunConfig& cfg) {
    convgen::ConvGenConfig c;
    c.ratio = cfg.ratio;
    c.model = cfg.model;
    c.temperature = cfg.temperature;
    c.max_tokens = cfg.max_tokens;
    c.retry_rejected = cfg.retry_rejected;
    c.drop_on_leak = cfg.drop_on_leak;
    c.workers = cfg.workers;
    return c;
}

void count_build(json& counts, const convgen::ConversationBuild& build) {
    counts["conversation"] = build.samples.size();
    counts["accepted"] = build.accepted;
    counts["rejected"] = build.rejected;
    counts["errors"] = build.errors;
    counts["skipped"] = build.skipped;
}

// Prediction line: {"clip_id", "description", "justification", "control"}.
struct Prediction {
    std::string clip_id;
    std::string description;
    std::string justification;
    std::string control;
};

std::vector<Prediction> load_predictions(const RunConfig& cfg, Run& run) {
    require(cfg.predictions, "predictions");
    auto in = open_input(cfg.predictions);
    std::vector<Prediction> out;
    std::set<std::string> seen;
    std::size_t line = 0;
    for (const auto& j : io::read_jsonl(in)) {
        ++line;
        Prediction p;
        try {
            p.clip_id = j.at("clip_id").get<std::string>();
            p.description = j.value("description", std::string{});
            p.justification = j.value("justification", std::string{});
            p.control = j.value("control", std::string{});
        } catch (const json::exception& e) {
            throw ParseError(line, std::string("prediction record: ") + e.what());
        }
        if (!seen.insert(p.clip_id).second) throw ValidationError(p.clip_id, "duplicate prediction");
        out.push_back(std::move(p));
    }
    run.input("predictions", cfg.predictions);
    return out;
}

std::map<std::string, const ClipRecord*> index_records(const Corpus& corpus) {
    std::map<std::string, const ClipRecord*> by_id;
    for (const auto& e : corpus.entries) by_id[e.record.clip_id] = &e.record;
    return by_id;
}

const ClipRecord& record_for(const std::map<std::string, const ClipRecord*>& by_id, const std::string& clip_id) {
    auto it = by_id.find(clip_id);
    if (it == by_id.end()) throw ValidationError(clip_id, "prediction for a clip missing from the annotations");
    return *it->second;
}

std::vector<metrics::TextPair> text_pairs(const std::vector<Prediction>& preds,
                                          const std::map<std::string, const ClipRecord*>& by_id) {
    std::vector<metrics::TextPair> pairs;
    for (const auto& p : preds) {
        const auto& r = record_for(by_id, p.clip_id);
        auto more = metrics::make_text_pairs(p.clip_id, p.description, p.justification, r.description, r.justification);
        pairs.insert(pairs.end(), more.begin(), more.end());
    }
    return pairs;
}

struct ControlInputs {
    std::vector<metrics::ControlSeries> series;
    std::size_t parse_failures = 0;
    std::vector<std::string> warnings;
};

// Unparseable control answers are counted and left out of both channels.
ControlInputs control_inputs(const std::vector<Prediction>& preds,
                             const std::map<std::string, const ClipRecord*>& by_id) {
    ControlInputs out;
    metrics::ControlSeries speed;
    speed.channel = metrics::Channel::speed;
    for (const auto& p : preds) {
        const auto& r = record_for(by_id, p.clip_id);
        try {
            auto parsed = codec::parse_control_answer_detailed(p.control);
            for (auto& w : parsed.warnings) out.warnings.push_back(p.clip_id + ": " + w);
            speed.predictions.push_back(parsed.value);
            speed.ground_truth.push_back(corpus::control_target(r).value);
        } catch (const ExtractionError& e) {
            ++out.parse_failures;
            out.warnings.push_back(p.clip_id + ": " + e.what());
        }
    }
    if (!speed.predictions.empty()) {
        metrics::ControlSeries angle = speed;
        angle.channel = metrics::Channel::angle;
        out.series.push_back(std::move(speed));
        out.series.push_back(std::move(angle));
    }
    return out;
}

void write_eval_report(Run& run, const RunConfig& cfg, metrics::EvalReport report) {
    run.output("report", cfg.out, report_to_json(report).dump(2) + "\n");
    run.output("table", cfg.out + ".tsv", metrics::report_table(report));
    run.counts()["warnings"] = report.warnings.size();
}

// --- subcommands -----------------------------------------------------------

void cmd_validate(const RunConfig& cfg) {
    Run run("validate", cfg);
    const Corpus corpus = load_corpus(cfg, run);
    std::cout << "ok: " << corpus.entries.size() << " clips, " << corpus.missing_detections
              << " without detections\n";
    if (cfg.out.empty()) return;
    run.counts() = {{"clips", corpus.entries.size()}, {"missing_detections", corpus.missing_detections}};
    json summary = run.counts();
    run.output("summary", cfg.out, summary.dump(2) + "\n");
    run.finish();
}

void cmd_gen_fixed(const RunConfig& cfg) {
    require(cfg.out, "out");
    Run run("gen-fixed", cfg);
    const Corpus corpus = load_corpus(cfg, run);
    const auto bank = load_questions(cfg, run);
    const auto samples = qagen::generate_fixed_dataset(corpus, bank, cfg.seed);
    run.output("dataset", cfg.out, io::serialize_samples(samples));
    run.counts()["fixed"] = samples.size();
    run.finish();
    std::cout << "wrote " << samples.size() << " fixed samples to " << cfg.out << "\n";
}

void cmd_gen_conv(const RunConfig& cfg) {
    require(cfg.out, "out");
    Run run("gen-conv", cfg);
    const Corpus corpus = load_corpus(cfg, run);
    chat::ChatClient client(endpoint_for(cfg));
    const auto build = convgen::generate_conversations(corpus, client, convgen_config(cfg), cfg.seed);
    run.output("dataset", cfg.out, io::serialize_samples(build.samples));
    run.output("clips", cfg.out + ".clips.jsonl", convgen::serialize_manifest(build.manifest));
    count_build(run.counts(), build);
    run.finish();
    log_client(client);
    std::cout << "wrote " << build.samples.size() << " conversations to " << cfg.out << "\n";
}

void cmd_build_dataset(const RunConfig& cfg) {
    require(cfg.out, "out");
    Run run("build-dataset", cfg);
    const Corpus corpus = load_corpus(cfg, run);
    const auto bank = load_questions(cfg, run);
    auto samples = qagen::generate_fixed_dataset(corpus, bank, cfg.seed);
    const std::size_t fixed = samples.size();

    chat::ChatClient client(endpoint_for(cfg));
    const auto build = convgen::generate_conversations(corpus, client, convgen_config(cfg), cfg.seed);
    samples.insert(samples.end(), build.samples.begin(), build.samples.end());

    run.output("dataset", cfg.out, io::serialize_samples(samples));
    run.output("clips", cfg.out + ".clips.jsonl", convgen::serialize_manifest(build.manifest));
    run.counts()["fixed"] = fixed;
    count_build(run.counts(), build);
    run.counts()["total"] = samples.size();
    run.finish();
    log_client(client);
    std::cout << "wrote " << fixed << " fixed + " << build.samples.size() << " conversation samples to " << cfg.out
              << "\n";
}

void cmd_eval_text(const RunConfig& cfg) {
    require(cfg.out, "out");
    Run run("eval-text", cfg);
    const Corpus corpus = load_corpus(cfg, run);
    const auto preds = load_predictions(cfg, run);
    auto report = metrics::assemble_report(text_pairs(preds, index_records(corpus)), {}, {}, cfg.taus);
    write_eval_report(run, cfg, std::move(report));
    run.finish();
}

void cmd_eval_control(const RunConfig& cfg) {
    require(cfg.out, "out");
    Run run("eval-control", cfg);
    const Corpus corpus = load_corpus(cfg, run);
    const auto preds = load_predictions(cfg, run);
    auto control = control_inputs(preds, index_records(corpus));
    auto report = metrics::assemble_report({}, {}, control.series, cfg.taus);
    report.control_parse_failures = control.parse_failures;
    report.warnings.insert(report.warnings.end(), control.warnings.begin(), control.warnings.end());
    write_eval_report(run, cfg, std::move(report));
    run.counts()["control_parse_failures"] = control.parse_failures;
    run.finish();
}

void cmd_eval_judge(const RunConfig& cfg) {
    require(cfg.out, "out");
    Run run("eval-judge", cfg);
    const Corpus corpus = load_corpus(cfg, run);
    const auto preds = load_predictions(cfg, run);
    std::vector<judge::JudgePair> pairs;
    for (const auto& tp : text_pairs(preds, index_records(corpus))) {
        pairs.push_back({tp.clip_id, tp.task, tp.reference, tp.prediction});
    }
    judge::JudgeConfig jc;
    jc.model = cfg.model;
    jc.temperature = cfg.temperature;
    jc.max_tokens = cfg.judge_max_tokens;
    jc.workers = cfg.workers;
    chat::ChatClient client(endpoint_for(cfg));
    const auto report = judge::judge_batch(pairs, client, jc);
    run.output("judge_report", cfg.out, judge::report_to_json(report).dump(2) + "\n");
    run.counts() = {{"pairs", pairs.size()}, {"scored", report.scored}, {"excluded", report.excluded}};
    run.finish();
    log_client(client);
}

void cmd_report(const RunConfig& cfg) {
    require(cfg.out, "out");
    Run run("report", cfg);
    const Corpus corpus = load_corpus(cfg, run);
    const auto preds = load_predictions(cfg, run);
    const auto by_id = index_records(corpus);

    std::vector<metrics::JudgeSummary> judged;
    if (!cfg.judge_report.empty()) {
        json j;
        try {
            j = json::parse(io::read_file(cfg.judge_report));
        } catch (const json::parse_error& e) {
            throw DecodeError(cfg.judge_report + ": " + e.what());
        }
        judged = judge::report_from_json(j).per_task();
        run.input("judge_report", cfg.judge_report);
    }
    auto control = control_inputs(preds, by_id);
    auto report = metrics::assemble_report(text_pairs(preds, by_id), judged, control.series, cfg.taus);
    report.control_parse_failures = control.parse_failures;
    report.warnings.insert(report.warnings.end(), control.warnings.begin(), control.warnings.end());
    write_eval_report(run, cfg, std::move(report));
    run.finish();
}

void cmd_tokenize(const RunConfig& cfg) {
    require(cfg.features, "features");
    require(cfg.projector, "projector");
    require(cfg.out, "out");
    Run run("tokenize-features", cfg);
    const auto frames = tokmath::read_features(cfg.features);
    run.input("features", cfg.features);
    const auto weights = tokmath::read_projector(cfg.projector);
    run.input("projector", cfg.projector);
    const auto tokens =
        tokmath::project_tokens(tokmath::temporal_feature(frames), tokmath::spatial_feature(frames), weights);
    tokmath::write_tokens(cfg.out, tokens);
    run.written("tokens", cfg.out);
    run.counts() = {{"frames", frames.size()}, {"rows", tokens.rows()}, {"d_text", tokens.cols()}};
    run.finish();
    std::cout << "wrote " << tokens.rows() << "x" << tokens.cols() << " tokens to " << cfg.out << "\n";
}

json error_record(const std::string& command, const std::string& kind, const std::string& message) {
    return {{"command", command}, {"error", kind}, {"message", message}};
}

int report_failure(const std::string& command, const std::string& out, const json& record) {
    std::cerr << record.dump() << "\n";
    if (!out.empty()) {
        try {
            io::write_file_atomic(out + ".error.json", record.dump(2) + "\n");
        } catch (const std::exception& e) {
            std::cerr << "could not write error record for " << command << ": " << e.what() << "\n";
        }
    }
    return 1;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Driving instruction-data builder and evaluation toolkit", "drivekit"};
    app.require_subcommand(1);
    Flags f;

    struct Command {
        std::string name;
        std::string help;
        std::function<void(const RunConfig&)> fn;
        // Which flag groups the command accepts.
        bool corpus, chat, predictions, taus, features;
    };
    const std::vector<Command> commands = {
        {"validate", "Parse and check annotation and detection files", cmd_validate, true, false, false, false, false},
        {"gen-fixed", "Build the fixed three-round QA dataset", cmd_gen_fixed, true, false, false, false, false},
        {"gen-conv", "Generate teacher conversations for a seeded subset of clips", cmd_gen_conv, true, true, false,
         false, false},
        {"build-dataset", "Fixed QAs for every clip plus conversations for a subset", cmd_build_dataset, true, true,
         false, false, false},
        {"eval-text", "BLEU4, CIDEr and METEOR for predicted captions", cmd_eval_text, true, false, true, false, false},
        {"eval-judge", "Score predicted captions with a chat-model judge", cmd_eval_judge, true, true, true, false,
         false},
        {"eval-control", "RMSE and threshold accuracy for predicted control", cmd_eval_control, true, false, true,
         true, false},
        {"tokenize-features", "Project precomputed frame features into text-space tokens", cmd_tokenize, false, false,
         false, false, true},
        {"report", "Full evaluation report (text, control, optional judge scores)", cmd_report, true, false, true, true,
         false},
    };

    std::string chosen;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", f.config, "JSON config file; flags override its values")->check(CLI::ExistingFile);
        add(sub, f.out, "-o,--out", "Output path");
        if (c.corpus) {
            add(sub, f.annotations, "--annotations", "Clip annotation file (JSONL)");
            add(sub, f.detections, "--detections", "Detection file (JSONL)");
            add(sub, f.split, "--split", "Clips to use: all, train or test");
            add(sub, f.seed, "--seed", "Run seed");
            add(sub, f.workers, "--workers", "Worker threads");
        }
        if (c.name == "gen-fixed" || c.name == "build-dataset") {
            add(sub, f.questions, "--questions", "Question-bank file (default: built-in bank)");
        }
        if (c.name == "gen-conv" || c.name == "build-dataset") {
            add(sub, f.ratio, "--ratio", "Share of clips that get a conversation");
        }
        if (c.chat) {
            add(sub, f.url, "--url", "Chat-completion endpoint");
            add(sub, f.model, "--model", "Model name");
            add(sub, f.temperature, "--temperature", "Sampling temperature");
            add(sub, f.max_tokens, "--max-tokens", "Completion token limit");
            add(sub, f.max_attempts, "--max-attempts", "Attempts per request");
            add(sub, f.cache_dir, "--cache-dir", "Response cache directory");
            add(sub, f.auth_env, "--auth-env", "Environment variable holding the API key");
        }
        if (c.predictions) add(sub, f.predictions, "--predictions", "Prediction file (JSONL)");
        if (c.taus) add(sub, f.taus, "--taus", "Threshold-accuracy tolerances, ascending")->delimiter(',');
        if (c.name == "report") add(sub, f.judge_report, "--judge-report", "Judge report to fold in");
        if (c.features) {
            add(sub, f.features, "--features", "Frame feature file");
            add(sub, f.projector, "--projector", "Projector weight file");
        }
        sub->callback([&chosen, name = c.name] { chosen = name; });
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::string out = f.out.value;
    try {
        const RunConfig cfg = resolve(f);
        out = cfg.out;
        for (const auto& c : commands) {
            if (c.name == chosen) c.fn(cfg);
        }
        return 0;
    } catch (const Error& e) {
        return report_failure(chosen, out, error_record(chosen, e.kind(), e.what()));
    } catch (const std::exception& e) {
        return report_failure(chosen, out, error_record(chosen, "internal_error", e.what()));
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace drivekit::cli
