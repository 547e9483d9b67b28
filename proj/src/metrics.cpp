#include "drivekit/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "drivekit/errors.hpp"
#include "drivekit/io.hpp"

namespace drivekit::metrics {

Tokens tokenize(std::string_view text) {
    Tokens out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && (std::isspace(c) || std::ispunct(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace {

constexpr int kMaxN = 4;

void warn(std::vector<std::string>* warnings, std::string message) {
    if (warnings) warnings->push_back(std::move(message));
}

// n-grams keyed by their tokens joined with an unprintable separator.
using NgramCounts = std::unordered_map<std::string, double>;

std::string ngram_key(const Tokens& tokens, std::size_t start, int n) {
    std::string key = tokens[start];
    for (int k = 1; k < n; ++k) {
        key += '\x1f';
        key += tokens[start + k];
    }
    return key;
}

NgramCounts count_ngrams(const Tokens& tokens, int n) {
    NgramCounts counts;
    if (tokens.size() < static_cast<std::size_t>(n)) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) counts[ngram_key(tokens, i, n)] += 1.0;
    return counts;
}

struct BleuStats {
    std::array<double, kMaxN> matched{};
    std::array<double, kMaxN> total{};
    double hyp_len = 0.0;
    double ref_len = 0.0;
};

std::size_t closest_ref_length(std::size_t hyp_len, const std::vector<Tokens>& references) {
    std::size_t best = references.front().size();
    for (const auto& r : references) {
        const auto d = [&](std::size_t len) { return len > hyp_len ? len - hyp_len : hyp_len - len; };
        if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    return best;
}

void accumulate(BleuStats& stats, const Tokens& prediction, const std::vector<Tokens>& references) {
    for (int n = 1; n <= kMaxN; ++n) {
        const auto hyp = count_ngrams(prediction, n);
        NgramCounts max_ref;
        for (const auto& ref : references) {
            for (const auto& [g, c] : count_ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], c);
        }
        for (const auto& [g, c] : hyp) {
            auto it = max_ref.find(g);
            if (it != max_ref.end()) stats.matched[n - 1] += std::min(c, it->second);
            stats.total[n - 1] += c;
        }
    }
    stats.hyp_len += static_cast<double>(prediction.size());
    stats.ref_len += static_cast<double>(closest_ref_length(prediction.size(), references));
}

double brevity_penalty(double hyp_len, double ref_len) {
    if (hyp_len <= 0.0) return 0.0;
    if (hyp_len > ref_len) return 1.0;
    return std::exp(1.0 - ref_len / hyp_len);
}

double bleu_from_stats(const BleuStats& stats, bool smooth) {
    double log_sum = 0.0;
    for (int n = 0; n < kMaxN; ++n) {
        double num = stats.matched[n];
        double den = stats.total[n];
        if (smooth && n > 0) {
            num += 1.0;
            den += 1.0;
        }
        if (num <= 0.0 || den <= 0.0) return 0.0;
        log_sum += std::log(num / den);
    }
    return 100.0 * brevity_penalty(stats.hyp_len, stats.ref_len) * std::exp(log_sum / kMaxN);
}

std::vector<Tokens> tokenize_all(const std::vector<std::string>& texts) {
    std::vector<Tokens> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(tokenize(t));
    return out;
}

std::vector<std::vector<Tokens>> tokenize_refs(const std::vector<std::vector<std::string>>& refs) {
    std::vector<std::vector<Tokens>> out;
    out.reserve(refs.size());
    for (const auto& r : refs) out.push_back(tokenize_all(r));
    return out;
}

void check_corpus(std::size_t predictions, const std::vector<std::vector<Tokens>>& references) {
    if (predictions != references.size()) {
        throw ShapeError("got " + std::to_string(predictions) + " predictions for " +
                         std::to_string(references.size()) + " reference sets");
    }
    for (const auto& refs : references) {
        if (refs.empty()) throw ShapeError("every prediction needs at least one reference");
    }
}

}  // namespace

double sentence_bleu4(const Tokens& prediction, const std::vector<Tokens>& references,
                      std::vector<std::string>* warnings) {
    if (references.empty()) throw ShapeError("bleu4 needs at least one reference");
    if (prediction.empty()) {
        warn(warnings, "bleu4: empty prediction scored 0");
        return 0.0;
    }
    BleuStats stats;
    accumulate(stats, prediction, references);
    return bleu_from_stats(stats, /*smooth=*/true);
}

double bleu4(std::string_view prediction, const std::vector<std::string>& references,
             std::vector<std::string>* warnings) {
    return sentence_bleu4(tokenize(prediction), tokenize_all(references), warnings);
}

double corpus_bleu4(const std::vector<Tokens>& predictions, const std::vector<std::vector<Tokens>>& references,
                    std::vector<std::string>* warnings) {
    check_corpus(predictions.size(), references);
    BleuStats stats;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i].empty()) warn(warnings, "bleu4: empty prediction at item " + std::to_string(i));
        accumulate(stats, predictions[i], references[i]);
    }
    if (stats.hyp_len == 0.0) return 0.0;
    return bleu_from_stats(stats, /*smooth=*/false);
}

double corpus_bleu4(const std::vector<std::string>& predictions, const std::vector<std::vector<std::string>>& references,
                    std::vector<std::string>* warnings) {
    return corpus_bleu4(tokenize_all(predictions), tokenize_refs(references), warnings);
}

namespace {

constexpr double kCiderSigma = 6.0;

struct CiderVec {
    std::array<NgramCounts, kMaxN> weights;
    std::array<double, kMaxN> norm{};
    double length = 0.0;
};

CiderVec cider_vector(const Tokens& tokens, const NgramCounts& doc_freq, double log_items) {
    CiderVec v;
    for (int n = 1; n <= kMaxN; ++n) {
        for (const auto& [g, tf] : count_ngrams(tokens, n)) {
            auto it = doc_freq.find(g);
            const double df = std::log(std::max(1.0, it == doc_freq.end() ? 0.0 : it->second));
            const double w = tf * (log_items - df);
            v.weights[n - 1][g] = w;
            v.norm[n - 1] += w * w;
        }
        v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
    }
    v.length = static_cast<double>(tokens.size());
    return v;
}

double cider_similarity(const CiderVec& hyp, const CiderVec& ref) {
    const double delta = hyp.length - ref.length;
    const double penalty = std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
    double total = 0.0;
    for (int n = 0; n < kMaxN; ++n) {
        double dot = 0.0;
        for (const auto& [g, w] : hyp.weights[n]) {
            auto it = ref.weights[n].find(g);
            if (it != ref.weights[n].end()) dot += std::min(w, it->second) * it->second;
        }
        if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) dot /= hyp.norm[n] * ref.norm[n];
        total += dot * penalty;
    }
    return total;
}

}  // namespace

std::vector<double> cider_d_scores(const std::vector<Tokens>& predictions,
                                   const std::vector<std::vector<Tokens>>& references,
                                   std::vector<std::string>* warnings) {
    check_corpus(predictions.size(), references);
    if (predictions.empty()) return {};
    if (predictions.size() == 1) warn(warnings, "cider: single-item corpus, IDF is degenerate and scores are 0");

    NgramCounts doc_freq;
    for (const auto& refs : references) {
        std::unordered_map<std::string, bool> seen;
        for (const auto& ref : refs) {
            for (int n = 1; n <= kMaxN; ++n) {
                for (const auto& entry : count_ngrams(ref, n)) seen[entry.first] = true;
            }
        }
        for (const auto& entry : seen) doc_freq[entry.first] += 1.0;
    }
    const double log_items = std::log(static_cast<double>(predictions.size()));

    std::vector<double> scores;
    scores.reserve(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto hyp = cider_vector(predictions[i], doc_freq, log_items);
        double sum = 0.0;
        for (const auto& ref : references[i]) sum += cider_similarity(hyp, cider_vector(ref, doc_freq, log_items));
        scores.push_back(10.0 * (sum / kMaxN) / static_cast<double>(references[i].size()));
    }
    return scores;
}

double cider(const std::vector<Tokens>& predictions, const std::vector<std::vector<Tokens>>& references,
             std::vector<std::string>* warnings) {
    const auto scores = cider_d_scores(predictions, references, warnings);
    if (scores.empty()) return 0.0;
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

double cider(const std::vector<std::string>& predictions, const std::vector<std::vector<std::string>>& references,
             std::vector<std::string>* warnings) {
    return cider(tokenize_all(predictions), tokenize_refs(references), warnings);
}

namespace {

// Finds, among alignments with the maximum number of exact matches, one with
// the fewest chunks. Depth-first over prediction positions with a node
// budget; the first leaf reached is the greedy "extend the current chunk"
// alignment, so an exhausted budget still returns a sensible answer.
class ChunkSearch {
public:
    ChunkSearch(const Tokens& prediction, const Tokens& reference) {
        std::unordered_map<std::string, int> ids;
        auto id_of = [&](const std::string& w) {
            auto [it, inserted] = ids.emplace(w, static_cast<int>(ids.size()));
            return it->second;
        };
        for (const auto& w : reference) ref_ids_.push_back(id_of(w));
        for (const auto& w : prediction) pred_ids_.push_back(id_of(w));
        const std::size_t vocab = ids.size();
        positions_.resize(vocab);
        for (std::size_t j = 0; j < ref_ids_.size(); ++j) positions_[ref_ids_[j]].push_back(static_cast<int>(j));
        std::vector<int> pred_count(vocab, 0);
        for (int w : pred_ids_) ++pred_count[w];
        need_.resize(vocab);
        remaining_ = pred_count;
        for (std::size_t w = 0; w < vocab; ++w) {
            need_[w] = std::min<int>(pred_count[w], static_cast<int>(positions_[w].size()));
            matches_ += static_cast<std::size_t>(need_[w]);
        }
        used_.assign(ref_ids_.size(), false);
    }

    MeteorAlignment run() {
        if (matches_ == 0) return {0, 0};
        dfs(0, -1, 0);
        return {matches_, best_};
    }

private:
    static constexpr std::size_t kBudget = 200000;

    void dfs(std::size_t i, int prev_ref, std::size_t chunks) {
        if (chunks >= best_ || nodes_ >= kBudget) return;
        ++nodes_;
        if (i == pred_ids_.size()) {
            best_ = chunks;
            return;
        }
        const int w = pred_ids_[i];
        --remaining_[w];
        if (need_[w] > 0) {
            // Continuing the current chunk first makes the first leaf greedy.
            std::vector<int> order;
            if (prev_ref >= 0 && prev_ref + 1 < static_cast<int>(ref_ids_.size()) && ref_ids_[prev_ref + 1] == w &&
                !used_[prev_ref + 1]) {
                order.push_back(prev_ref + 1);
            }
            for (int j : positions_[w]) {
                if (!used_[j] && (order.empty() || j != order.front())) order.push_back(j);
            }
            for (int j : order) {
                used_[j] = true;
                --need_[w];
                const bool extends = prev_ref >= 0 && j == prev_ref + 1;
                dfs(i + 1, j, chunks + (extends ? 0 : 1));
                ++need_[w];
                used_[j] = false;
            }
        }
        if (remaining_[w] >= need_[w]) dfs(i + 1, -1, chunks);
        ++remaining_[w];
    }

    std::vector<int> pred_ids_;
    std::vector<int> ref_ids_;
    std::vector<std::vector<int>> positions_;
    std::vector<int> need_;
    std::vector<int> remaining_;
    std::vector<bool> used_;
    std::size_t matches_ = 0;
    std::size_t best_ = std::numeric_limits<std::size_t>::max();
    std::size_t nodes_ = 0;
};

}  // namespace

MeteorAlignment meteor_align(const Tokens& prediction, const Tokens& reference) {
    return ChunkSearch(prediction, reference).run();
}

double meteor_lite(const Tokens& prediction, const Tokens& reference, const MeteorParams& params,
                   std::vector<std::string>* warnings) {
    if (prediction.empty() || reference.empty()) {
        warn(warnings, "meteor: empty input scored 0");
        return 0.0;
    }
    const auto align = meteor_align(prediction, reference);
    if (align.matches == 0) return 0.0;
    const double m = static_cast<double>(align.matches);
    const double precision = m / static_cast<double>(prediction.size());
    const double recall = m / static_cast<double>(reference.size());
    const double fmean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    const double frag = static_cast<double>(align.chunks) / m;
    const double penalty = params.gamma * std::pow(frag, params.beta);
    return 100.0 * fmean * (1.0 - penalty);
}

double meteor_lite(std::string_view prediction, std::string_view reference, std::vector<std::string>* warnings) {
    return meteor_lite(tokenize(prediction), tokenize(reference), MeteorParams{}, warnings);
}

const char* to_string(Channel channel) {
    return channel == Channel::speed ? "speed" : "angle";
}

std::vector<double> absolute_errors(const ControlSeries& series) {
    if (series.predictions.size() != series.ground_truth.size()) {
        throw ShapeError("control series length mismatch: " + std::to_string(series.predictions.size()) +
                         " predictions vs " + std::to_string(series.ground_truth.size()) + " labels");
    }
    if (series.predictions.empty()) throw ShapeError("control series is empty");
    std::vector<double> errors;
    errors.reserve(series.predictions.size());
    for (std::size_t i = 0; i < series.predictions.size(); ++i) {
        const auto& p = series.predictions[i];
        const auto& g = series.ground_truth[i];
        errors.push_back(series.channel == Channel::speed ? std::abs(p.speed - g.speed) : std::abs(p.angle - g.angle));
    }
    return errors;
}

double control_rmse(const ControlSeries& series) {
    const auto errors = absolute_errors(series);
    long double sum = 0.0L;
    for (double e : errors) sum += static_cast<long double>(e) * e;
    return static_cast<double>(std::sqrt(sum / static_cast<long double>(errors.size())));
}

double threshold_accuracy(const ControlSeries& series, double tau) {
    if (!(tau > 0.0)) throw RangeError("tau must be positive");
    const auto errors = absolute_errors(series);
    const auto hits = std::count_if(errors.begin(), errors.end(), [&](double e) { return e < tau; });
    return 100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
}

const char* to_string(Task task) {
    switch (task) {
        case Task::description:
            return "description";
        case Task::justification:
            return "justification";
        case Task::full_sentence:
            break;
    }
    return "full_sentence";
}

std::vector<TextPair> make_text_pairs(const std::string& clip_id, const std::string& pred_description,
                                      const std::string& pred_justification, const std::string& ref_description,
                                      const std::string& ref_justification) {
    return {
        {clip_id, pred_description, ref_description, Task::description},
        {clip_id, pred_justification, ref_justification, Task::justification},
        {clip_id, pred_description + " " + pred_justification, ref_description + " " + ref_justification,
         Task::full_sentence},
    };
}

void validate_taus(const std::vector<double>& taus) {
    if (taus.empty()) throw ConfigError("tau list is empty");
    for (std::size_t i = 0; i < taus.size(); ++i) {
        if (!(taus[i] > 0.0) || !std::isfinite(taus[i])) throw ConfigError("tau values must be positive and finite");
        if (i > 0 && !(taus[i - 1] < taus[i])) throw ConfigError("tau list must be strictly increasing");
    }
}

EvalReport assemble_report(const std::vector<TextPair>& pairs, const std::vector<JudgeSummary>& judge,
                           const std::vector<ControlSeries>& series, const std::vector<double>& taus) {
    validate_taus(taus);
    EvalReport report;

    for (Task task : kTasks) {
        std::vector<Tokens> preds;
        std::vector<std::vector<Tokens>> refs;
        for (const auto& p : pairs) {
            if (p.task != task) continue;
            preds.push_back(tokenize(p.prediction));
            refs.push_back({tokenize(p.reference)});
        }
        if (preds.empty()) continue;
        TextScores s;
        s.count = preds.size();
        s.bleu4 = corpus_bleu4(preds, refs, &report.warnings);
        s.cider = 100.0 * cider(preds, refs, &report.warnings);
        double meteor_sum = 0.0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            meteor_sum += meteor_lite(preds[i], refs[i][0], MeteorParams{}, &report.warnings);
        }
        s.meteor = meteor_sum / static_cast<double>(preds.size());
        report.text[task] = s;
    }

    for (const auto& j : judge) report.judge[j.task] = j;

    for (const auto& s : series) {
        ChannelReport c;
        c.count = s.predictions.size();
        c.rmse = control_rmse(s);
        for (double tau : taus) {
            const double acc = threshold_accuracy(s, tau);
            if (!c.accuracy.empty() && acc < c.accuracy.back().second) {
                throw std::logic_error("threshold accuracy decreased as tau grew");
            }
            c.accuracy.emplace_back(tau, acc);
        }
        report.control[s.channel] = std::move(c);
    }
    return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
    using nlohmann::json;
    json text = json::object();
    for (const auto& [task, s] : report.text) {
        text[to_string(task)] = {{"bleu4", s.bleu4}, {"cider", s.cider}, {"meteor", s.meteor}, {"count", s.count}};
    }
    json judge = json::object();
    for (const auto& [task, j] : report.judge) {
        judge[to_string(task)] = {{"score", j.mean}, {"scored", j.scored}, {"excluded", j.excluded}};
    }
    json control = json::object();
    for (Channel ch : {Channel::speed, Channel::angle}) {
        auto it = report.control.find(ch);
        if (it == report.control.end()) {
            control[to_string(ch)] = nullptr;
            continue;
        }
        json acc = json::array();
        for (const auto& [tau, a] : it->second.accuracy) acc.push_back({{"tau", tau}, {"accuracy", a}});
        control[to_string(ch)] = {{"rmse", it->second.rmse}, {"threshold_accuracy", acc}, {"count", it->second.count}};
    }
    return {
        {"text", text},
        {"judge", judge},
        {"control", control},
        {"control_parse_failures", report.control_parse_failures},
        {"warnings", report.warnings},
    };
}

namespace {

std::string fixed(double v, int digits) {
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(digits);
    ss << v;
    return ss.str();
}

}  // namespace

std::string report_table(const EvalReport& report) {
    std::string out = "section\tkey\tvalue\n";
    auto row = [&](const std::string& section, const std::string& key, const std::string& value) {
        out += section + "\t" + key + "\t" + value + "\n";
    };
    for (const auto& [task, s] : report.text) {
        const std::string sec = std::string("text.") + to_string(task);
        row(sec, "bleu4", fixed(s.bleu4, 4));
        row(sec, "cider", fixed(s.cider, 4));
        row(sec, "meteor", fixed(s.meteor, 4));
        row(sec, "count", std::to_string(s.count));
    }
    for (const auto& [task, j] : report.judge) {
        const std::string sec = std::string("judge.") + to_string(task);
        row(sec, "score", fixed(j.mean, 4));
        row(sec, "scored", std::to_string(j.scored));
        row(sec, "excluded", std::to_string(j.excluded));
    }
    for (const auto& [ch, c] : report.control) {
        const std::string sec = std::string("control.") + to_string(ch);
        row(sec, "rmse", fixed(c.rmse, 6));
        for (const auto& [tau, a] : c.accuracy) row(sec, "A_" + io::shortest_decimal(tau), fixed(a, 4));
        row(sec, "count", std::to_string(c.count));
    }
    row("control", "parse_failures", std::to_string(report.control_parse_failures));
    return out;
}

}  // namespace drivekit::metrics
