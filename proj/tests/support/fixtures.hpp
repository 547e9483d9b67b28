#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drivekit/corpus.hpp"
#include "drivekit/io.hpp"
#include "drivekit/types.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("drivekit-" + tag + "-" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Values with at most two fractional digits, like the logged signals.
inline double centi(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng) / 100.0;
}

inline std::vector<drivekit::ClipRecord> synthetic_records(std::size_t n, std::uint64_t seed) {
    static const char* kActions[] = {"The car slows down", "The car accelerates", "The car turns right",
                                     "The car turns left", "The car stops", "The car merges into the left lane"};
    static const char* kReasons[] = {"because the light turned red", "since the road ahead is clear",
                                     "as traffic is moving forward", "because a pedestrian is crossing",
                                     "to follow the road", "because the car in front stopped"};
    std::mt19937_64 rng(seed);
    std::vector<drivekit::ClipRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        drivekit::ClipRecord r;
        r.clip_id = "clip_" + std::to_string(1000 + i);
        for (std::size_t k = 0; k < drivekit::kFrameCount; ++k) {
            r.frame_ids.push_back(r.clip_id + "_f" + std::to_string(k));
            r.speeds.push_back(centi(rng, 0, 3000));
            r.angles.push_back(k == 0 ? 0.0 : centi(rng, -4500, 4500));
        }
        r.description = std::string(kActions[rng() % 6]) + ".";
        r.justification = std::string(kReasons[rng() % 6]) + ".";
        r.split = (i % 5 == 4) ? drivekit::Split::test : drivekit::Split::train;
        if (i % 10 != 9) r.next_control = drivekit::ControlEstimate{centi(rng, 0, 3000), centi(rng, -4500, 4500)};
        out.push_back(std::move(r));
    }
    return out;
}

inline drivekit::DetectionSet synthetic_detections(const std::string& clip_id, std::mt19937_64& rng) {
    static const char* kLabels[] = {"car", "truck", "person", "traffic light", "bus"};
    auto d = drivekit::corpus::empty_detections(clip_id);
    for (auto& frame : d.frames) {
        const int count = static_cast<int>(rng() % 4);
        for (int c = 0; c < count; ++c) {
            double x1 = std::uniform_int_distribution<int>(0, 900)(rng) / 1000.0;
            double y1 = std::uniform_int_distribution<int>(0, 900)(rng) / 1000.0;
            double x2 = x1 + std::uniform_int_distribution<int>(1, 100)(rng) / 1000.0;
            double y2 = y1 + std::uniform_int_distribution<int>(1, 100)(rng) / 1000.0;
            frame.push_back({kLabels[rng() % 5], {x1, y1, x2, y2}});
        }
    }
    return d;
}

struct CorpusFiles {
    std::string annotations;
    std::string detections;
    std::vector<drivekit::ClipRecord> records;
};

// Writes annotations.jsonl and detections.jsonl for `n` synthetic clips.
inline CorpusFiles write_corpus(const TempDir& dir, std::size_t n, std::uint64_t seed = 11) {
    CorpusFiles files{dir / "annotations.jsonl", dir / "detections.jsonl", synthetic_records(n, seed)};
    std::mt19937_64 rng(seed + 1);
    std::string ann, det;
    for (const auto& r : files.records) {
        ann += drivekit::corpus::serialize(r) + "\n";
        det += drivekit::corpus::serialize(synthetic_detections(r.clip_id, rng)) + "\n";
    }
    spit(files.annotations, ann);
    spit(files.detections, det);
    return files;
}

}  // namespace fixtures
