#include "drivekit/io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "drivekit/errors.hpp"

namespace drivekit {

const char* to_string(Split split) {
    return split == Split::train ? "train" : "test";
}

const char* to_string(Speaker speaker) {
    return speaker == Speaker::human ? "human" : "assistant";
}

const char* to_string(SampleKind kind) {
    return kind == SampleKind::fixed_qa ? "fixed_qa" : "conversation";
}

std::string check_sample(const InstructionSample& sample) {
    if (sample.turns.size() % 2 != 0) return "odd turn count";
    if (sample.turns.size() != 6) return "expected 6 turns, got " + std::to_string(sample.turns.size());
    for (std::size_t i = 0; i < sample.turns.size(); ++i) {
        const Speaker expected = (i % 2 == 0) ? Speaker::human : Speaker::assistant;
        if (sample.turns[i].speaker != expected) return "turns do not alternate at index " + std::to_string(i);
    }
    return {};
}

}  // namespace drivekit

namespace drivekit::io {

void for_each_line(std::istream& in, const std::function<void(std::size_t, std::string_view)>& fn) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        fn(number, line);
    }
}

std::vector<json> read_jsonl(std::istream& in) {
    std::vector<json> out;
    for_each_line(in, [&](std::size_t number, std::string_view line) {
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) throw ParseError(number, "invalid JSON");
        if (!j.is_object()) throw ParseError(number, "expected a JSON object");
        out.push_back(std::move(j));
    });
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error("digest_error", "EVP_Digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xf]);
    }
    return out;
}

std::string file_sha256(const std::filesystem::path& path) {
    return sha256_hex(read_file(path));
}

std::string shortest_decimal(double value) {
    if (value == 0.0) value = 0.0;  // drop the sign of negative zero
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    std::string s(buf.data(), end);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

json sample_to_json(const InstructionSample& sample) {
    json turns = json::array();
    for (const auto& turn : sample.turns) {
        turns.push_back({{"from", turn.speaker == Speaker::human ? "human" : "gpt"}, {"value", turn.text}});
    }
    json j = {
        {"sample_id", sample.sample_id},
        {"clip_id", sample.clip_id},
        {"kind", to_string(sample.kind)},
        {"conversations", std::move(turns)},
    };
    if (!sample.context.empty()) j["context"] = sample.context;
    if (!sample.control_target.empty()) j["control_target"] = sample.control_target;
    return j;
}

InstructionSample sample_from_json(const json& j) {
    InstructionSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.clip_id = j.at("clip_id").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "fixed_qa") {
        s.kind = SampleKind::fixed_qa;
    } else if (kind == "conversation") {
        s.kind = SampleKind::conversation;
    } else {
        throw DecodeError("unknown sample kind '" + kind + "'");
    }
    for (const auto& t : j.at("conversations")) {
        const auto from = t.at("from").get<std::string>();
        Turn turn;
        if (from == "human") {
            turn.speaker = Speaker::human;
        } else if (from == "gpt") {
            turn.speaker = Speaker::assistant;
        } else {
            throw DecodeError("unknown speaker '" + from + "'");
        }
        turn.text = t.at("value").get<std::string>();
        s.turns.push_back(std::move(turn));
    }
    s.context = j.value("context", std::string{});
    s.control_target = j.value("control_target", std::string{});
    return s;
}

std::string serialize_samples(std::span<const InstructionSample> samples) {
    std::string out;
    for (const auto& s : samples) {
        out += sample_to_json(s).dump();
        out += '\n';
    }
    return out;
}

}  // namespace drivekit::io
