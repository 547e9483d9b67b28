#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "drivekit/types.hpp"

namespace drivekit::metrics {

using Tokens = std::vector<std::string>;

/// Lowercases ASCII letters and splits on whitespace and ASCII punctuation;
/// punctuation is dropped. Bytes >= 0x80 are word characters.
Tokens tokenize(std::string_view text);

// ---------------------------------------------------------------------------
// BLEU-4 (uniform weights, brevity penalty against the closest reference
// length, ties resolved toward the shorter reference). All scores 0..100.

/// Sentence level; precisions for n >= 2 use add-one smoothing.
double sentence_bleu4(const Tokens& prediction, const std::vector<Tokens>& references,
                      std::vector<std::string>* warnings = nullptr);
double bleu4(std::string_view prediction, const std::vector<std::string>& references,
             std::vector<std::string>* warnings = nullptr);

/// Corpus level, unsmoothed: clipped n-gram counts and lengths are pooled
/// over the corpus before the geometric mean.
double corpus_bleu4(const std::vector<Tokens>& predictions, const std::vector<std::vector<Tokens>>& references,
                    std::vector<std::string>* warnings = nullptr);
double corpus_bleu4(const std::vector<std::string>& predictions, const std::vector<std::vector<std::string>>& references,
                    std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// CIDEr-D: TF-IDF weighted n-gram vectors (n = 1..4), document frequency over
// each item's reference set, clipped cosine, Gaussian length penalty with
// sigma = 6, averaged over n and references, times 10. Values are on the
// usual CIDEr scale (a perfect single-reference match scores 10); reports
// multiply by 100.

std::vector<double> cider_d_scores(const std::vector<Tokens>& predictions,
                                   const std::vector<std::vector<Tokens>>& references,
                                   std::vector<std::string>* warnings = nullptr);
double cider(const std::vector<Tokens>& predictions, const std::vector<std::vector<Tokens>>& references,
             std::vector<std::string>* warnings = nullptr);
double cider(const std::vector<std::string>& predictions, const std::vector<std::vector<std::string>>& references,
             std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// METEOR restricted to exact unigram matches: Fmean with alpha = 0.9 times
// (1 - 0.5 * (chunks / matches)^3). Among maximum-match alignments the one
// with the fewest chunks is used. 0..100.

struct MeteorParams {
    double alpha = 0.9;
    double beta = 3.0;
    double gamma = 0.5;
};

struct MeteorAlignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

MeteorAlignment meteor_align(const Tokens& prediction, const Tokens& reference);
double meteor_lite(const Tokens& prediction, const Tokens& reference, const MeteorParams& params = {},
                   std::vector<std::string>* warnings = nullptr);
double meteor_lite(std::string_view prediction, std::string_view reference,
                   std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Control signals.

enum class Channel { speed, angle };
const char* to_string(Channel channel);

struct ControlSeries {
    std::vector<ControlEstimate> predictions;
    std::vector<ControlEstimate> ground_truth;
    Channel channel = Channel::speed;
};

/// |prediction - ground truth| on the series' channel. Throws ShapeError on
/// a length mismatch or an empty series.
std::vector<double> absolute_errors(const ControlSeries& series);

double control_rmse(const ControlSeries& series);

/// 100 * #(error < tau) / n, strictly below. Throws RangeError unless tau > 0.
double threshold_accuracy(const ControlSeries& series, double tau);

inline const std::vector<double> kDefaultTaus = {0.1, 0.5, 1.0, 5.0};

// ---------------------------------------------------------------------------
// Report assembly.

enum class Task { description, justification, full_sentence };
const char* to_string(Task task);
inline constexpr Task kTasks[] = {Task::description, Task::justification, Task::full_sentence};

struct TextPair {
    std::string clip_id;
    std::string prediction;
    std::string reference;
    Task task = Task::description;
};

/// Description and justification pairs for one clip plus the derived
/// full-sentence pair (description + " " + justification on both sides).
std::vector<TextPair> make_text_pairs(const std::string& clip_id, const std::string& pred_description,
                                      const std::string& pred_justification, const std::string& ref_description,
                                      const std::string& ref_justification);

struct TextScores {
    double bleu4 = 0.0;   // corpus level, 0..100
    double cider = 0.0;   // CIDEr-D x 100
    double meteor = 0.0;  // mean sentence score, 0..100
    std::size_t count = 0;
};

struct JudgeSummary {
    Task task = Task::description;
    double mean = 0.0;  // 0..100
    std::size_t scored = 0;
    std::size_t excluded = 0;
};

struct ChannelReport {
    double rmse = 0.0;
    std::vector<std::pair<double, double>> accuracy;  // (tau, A_tau) ascending tau
    std::size_t count = 0;
};

struct EvalReport {
    std::map<Task, TextScores> text;
    std::map<Task, JudgeSummary> judge;
    std::map<Channel, ChannelReport> control;  // absent channel = no control input
    std::size_t control_parse_failures = 0;
    std::vector<std::string> warnings;
};

/// Throws ConfigError when taus are empty, non-positive or unsorted.
void validate_taus(const std::vector<double>& taus);

EvalReport assemble_report(const std::vector<TextPair>& pairs, const std::vector<JudgeSummary>& judge,
                           const std::vector<ControlSeries>& series, const std::vector<double>& taus = kDefaultTaus);

nlohmann::json report_to_json(const EvalReport& report);

/// Flat "section\tkey\tvalue" lines, one per number, for diffing.
std::string report_table(const EvalReport& report);

}  // namespace drivekit::metrics
