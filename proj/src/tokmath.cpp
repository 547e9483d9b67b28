#include "drivekit/tokmath.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "drivekit/errors.hpp"
#include "drivekit/io.hpp"

namespace drivekit::tokmath {

namespace {

std::string shape_of(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_frames(const std::vector<FrameFeature>& frames) {
    if (frames.empty()) throw ShapeError("no frames");
    const auto d = frames.front().cols();
    if (d == 0) throw ShapeError("feature width is zero");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].rows() != kFrameRows || frames[i].cols() != d) {
            throw ShapeError("frame " + std::to_string(i) + " is " + shape_of(frames[i]) + ", expected " +
                             std::to_string(kFrameRows) + "x" + std::to_string(d));
        }
        if (!frames[i].allFinite()) throw ShapeError("frame " + std::to_string(i) + " has non-finite entries");
    }
}

// --- binary layout ---------------------------------------------------------

constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 24;

struct Header {
    char magic[4];
    std::uint32_t dims[3];
    DType dtype;
    bool big_endian;
};

bool host_big_endian() { return std::endian::native == std::endian::big; }

template <typename T>
T load(const unsigned char* p, bool big_endian) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, p, sizeof(T));
    if (big_endian != host_big_endian()) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

template <typename T>
void store(std::string& out, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

std::string encode(const char* magic, const std::uint32_t (&dims)[3], DType dtype, const double* data) {
    std::string out;
    const std::size_t count = std::size_t{dims[0]} * dims[1] * dims[2];
    out.reserve(kHeaderSize + count * (dtype == DType::f32 ? 4 : 8));
    out.append(magic, 4);
    store(out, kVersion);
    for (auto dim : dims) store(out, dim);
    out.push_back(static_cast<char>(dtype));
    out.push_back(static_cast<char>(host_big_endian() ? 1 : 0));
    out.append(2, '\0');
    for (std::size_t i = 0; i < count; ++i) {
        if (dtype == DType::f32) {
            store(out, static_cast<float>(data[i]));
        } else {
            store(out, data[i]);
        }
    }
    return out;
}

// Returns the header and fills `values` with every payload element.
Header decode(const std::filesystem::path& path, const char* magic, std::vector<double>& values) {
    const std::string bytes = io::read_file(path);
    const auto where = path.string() + ": ";
    if (bytes.size() < kHeaderSize) throw DecodeError(where + "truncated header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

    Header h{};
    std::memcpy(h.magic, p, 4);
    if (std::memcmp(h.magic, magic, 4) != 0) {
        throw DecodeError(where + "bad magic, expected " + std::string(magic, 4));
    }
    const std::uint8_t order = p[21];
    if (order > 1) throw DecodeError(where + "unknown byte order " + std::to_string(order));
    h.big_endian = order == 1;
    const auto version = load<std::uint32_t>(p + 4, h.big_endian);
    if (version != kVersion) throw DecodeError(where + "unsupported version " + std::to_string(version));
    for (int i = 0; i < 3; ++i) h.dims[i] = load<std::uint32_t>(p + 8 + 4 * i, h.big_endian);
    if (p[20] > 1) throw DecodeError(where + "unknown dtype " + std::to_string(p[20]));
    h.dtype = static_cast<DType>(p[20]);

    const std::size_t width = h.dtype == DType::f32 ? 4 : 8;
    const std::size_t count = std::size_t{h.dims[0]} * h.dims[1] * h.dims[2];
    if (bytes.size() != kHeaderSize + count * width) {
        throw DecodeError(where + "payload is " + std::to_string(bytes.size() - kHeaderSize) + " bytes, header implies " +
                          std::to_string(count * width));
    }
    values.resize(count);
    const unsigned char* data = p + kHeaderSize;
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = h.dtype == DType::f32 ? static_cast<double>(load<float>(data + i * 4, h.big_endian))
                                          : load<double>(data + i * 8, h.big_endian);
        if (!std::isfinite(values[i])) throw DecodeError(where + "non-finite value at element " + std::to_string(i));
    }
    return h;
}

std::uint32_t dim(Eigen::Index n) {
    if (n < 0 || n > static_cast<Eigen::Index>(UINT32_MAX)) throw ShapeError("dimension out of range");
    return static_cast<std::uint32_t>(n);
}

}  // namespace

Matrix temporal_feature(const std::vector<FrameFeature>& frames) {
    check_frames(frames);
    Matrix t(static_cast<Eigen::Index>(frames.size()), frames.front().cols());
    for (std::size_t i = 0; i < frames.size(); ++i) t.row(static_cast<Eigen::Index>(i)) = frames[i].row(0);
    return t;
}

Matrix spatial_feature(const std::vector<FrameFeature>& frames) {
    check_frames(frames);
    Matrix s = Matrix::Zero(kPatchRows, frames.front().cols());
    for (const auto& f : frames) s += f.bottomRows(kPatchRows);
    s /= static_cast<double>(frames.size());
    return s;
}

Matrix project_tokens(const Matrix& temporal, const Matrix& spatial, const ProjectorWeights& weights) {
    if (temporal.cols() != spatial.cols()) {
        throw ShapeError("temporal " + shape_of(temporal) + " and spatial " + shape_of(spatial) + " widths differ");
    }
    if (weights.weight.rows() != temporal.cols()) {
        throw ShapeError("projector weight " + shape_of(weights.weight) + " does not accept width " +
                         std::to_string(temporal.cols()));
    }
    if (weights.bias.size() != weights.weight.cols()) {
        throw ShapeError("bias length " + std::to_string(weights.bias.size()) + " != projector output width " +
                         std::to_string(weights.weight.cols()));
    }
    Matrix stacked(temporal.rows() + spatial.rows(), temporal.cols());
    stacked << temporal, spatial;
    Matrix out = stacked * weights.weight;
    out.rowwise() += weights.bias.transpose();
    return out;
}

std::vector<FrameFeature> read_features(const std::filesystem::path& path) {
    std::vector<double> values;
    const Header h = decode(path, "DGFT", values);
    if (h.dims[1] != kFrameRows) {
        throw DecodeError(path.string() + ": frames have " + std::to_string(h.dims[1]) + " rows, expected " +
                          std::to_string(kFrameRows));
    }
    const Eigen::Index d = h.dims[2];
    std::vector<FrameFeature> frames;
    frames.reserve(h.dims[0]);
    const std::size_t per_frame = std::size_t{kFrameRows} * h.dims[2];
    for (std::uint32_t i = 0; i < h.dims[0]; ++i) {
        frames.push_back(Eigen::Map<const Matrix>(values.data() + i * per_frame, kFrameRows, d));
    }
    return frames;
}

void write_features(const std::filesystem::path& path, const std::vector<FrameFeature>& frames, DType dtype) {
    check_frames(frames);
    const auto d = frames.front().cols();
    std::vector<double> values;
    values.reserve(frames.size() * kFrameRows * d);
    for (const auto& f : frames) values.insert(values.end(), f.data(), f.data() + f.size());
    const std::uint32_t dims[3] = {dim(static_cast<Eigen::Index>(frames.size())), dim(kFrameRows), dim(d)};
    io::write_file_atomic(path, encode("DGFT", dims, dtype, values.data()));
}

ProjectorWeights read_projector(const std::filesystem::path& path) {
    std::vector<double> values;
    const Header h = decode(path, "DGPW", values);
    if (h.dims[0] != 1 || h.dims[1] < 2) throw DecodeError(path.string() + ": malformed projector shape");
    const Eigen::Index rows = h.dims[1];
    const Eigen::Index cols = h.dims[2];
    Eigen::Map<const Matrix> all(values.data(), rows, cols);
    ProjectorWeights w;
    w.weight = all.topRows(rows - 1);
    w.bias = all.row(rows - 1).transpose();
    return w;
}

void write_projector(const std::filesystem::path& path, const ProjectorWeights& weights, DType dtype) {
    if (weights.bias.size() != weights.weight.cols()) throw ShapeError("bias length does not match projector width");
    if (!weights.weight.allFinite() || !weights.bias.allFinite()) throw ShapeError("projector has non-finite entries");
    Matrix all(weights.weight.rows() + 1, weights.weight.cols());
    all << weights.weight, weights.bias.transpose();
    const std::uint32_t dims[3] = {1, dim(all.rows()), dim(all.cols())};
    io::write_file_atomic(path, encode("DGPW", dims, dtype, all.data()));
}

Matrix read_tokens(const std::filesystem::path& path) {
    std::vector<double> values;
    const Header h = decode(path, "DGTK", values);
    if (h.dims[0] != 1) throw DecodeError(path.string() + ": malformed token shape");
    return Eigen::Map<const Matrix>(values.data(), h.dims[1], h.dims[2]);
}

void write_tokens(const std::filesystem::path& path, const Matrix& tokens, DType dtype) {
    const std::uint32_t dims[3] = {1, dim(tokens.rows()), dim(tokens.cols())};
    io::write_file_atomic(path, encode("DGTK", dims, dtype, tokens.data()));
}

}  // namespace drivekit::tokmath
