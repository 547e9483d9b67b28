#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "drivekit/types.hpp"

namespace drivekit::qagen {

enum class QuestionSet { action, justification, control };

/// The three paraphrase sets used for fixed question answering.
struct QuestionBank {
    std::vector<std::string> set_a;  // action description
    std::vector<std::string> set_j;  // action justification
    std::vector<std::string> set_c;  // next-step control

    const std::vector<std::string>& get(QuestionSet which) const;
};

/// The eleven-entry sets every dataset defaults to.
QuestionBank default_question_bank();

/// Strips trailing whitespace from every entry, then checks each set is
/// nonempty with distinct entries. Throws ValidationError.
QuestionBank normalize(QuestionBank bank);

/// Question-bank file: {"set_a": [...], "set_j": [...], "set_c": [...]}.
QuestionBank parse_question_bank(std::string_view json_text);
std::string serialize_question_bank(const QuestionBank& bank);

/// Deterministic draw source. Wraps mt19937_64 (whose output sequence is
/// fixed by the standard) with a portable bounded-integer draw, so datasets
/// are identical across standard libraries.
class SeededSampler {
public:
    static constexpr std::string_view kAlgorithm = "mt19937_64+rejection";

    explicit SeededSampler(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    /// Sampler for one clip, independent of the order clips are visited in.
    static SeededSampler for_clip(std::uint64_t run_seed, std::string_view clip_id);

    /// Uniform over [0, bound). `bound` must be positive.
    std::uint64_t below(std::uint64_t bound);

    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// 64-bit FNV-1a, used to fold clip ids into sampler seeds.
std::uint64_t fnv1a64(std::string_view data);

/// splitmix64 finalizer; decorrelates nearby seeds.
std::uint64_t mix64(std::uint64_t x);

std::string sample_question(const QuestionBank& bank, QuestionSet which, SeededSampler& sampler);

/// Three rounds: (q_a, description), (q_j, justification), (q_c, control
/// answer for the clip's next-step label).
InstructionSample build_fixed_sample(const ClipRecord& record, const QuestionBank& bank, SeededSampler& sampler);

/// One fixed sample per clip, in corpus order. Each clip draws from
/// `SeededSampler::for_clip(seed, clip_id)`.
std::vector<InstructionSample> generate_fixed_dataset(const Corpus& corpus, const QuestionBank& bank,
                                                      std::uint64_t seed);

}  // namespace drivekit::qagen
