#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace drivekit::tokmath {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr Eigen::Index kPatchRows = 256;
inline constexpr Eigen::Index kFrameRows = kPatchRows + 1;

/// One frame's encoder output: row 0 is the global feature, rows 1..256 are
/// the patch features.
using FrameFeature = Matrix;

struct ProjectorWeights {
    Matrix weight;  // d x d_text
    Vector bias;    // d_text
};

/// N x d, row i is frame i's global row. Throws ShapeError on an empty input,
/// a frame that is not 257 rows, or mismatched widths.
Matrix temporal_feature(const std::vector<FrameFeature>& frames);

/// 256 x d element-wise mean of the patch blocks.
Matrix spatial_feature(const std::vector<FrameFeature>& frames);

/// [T; S] * W + b, one output row per input row.
Matrix project_tokens(const Matrix& temporal, const Matrix& spatial, const ProjectorWeights& weights);

// ---------------------------------------------------------------------------
// Binary files. Every file starts with a 24-byte header:
//
//   char[4] magic, u32 version (=1), u32 dim0, u32 dim1, u32 dim2,
//   u8 dtype (0 = f32, 1 = f64), u8 byte order (0 = little, 1 = big),
//   u8[2] reserved
//
// followed by dim0*dim1*dim2 row-major values. Header integers use the
// declared byte order.
//
//   DGFT  features   (N, 257, d)
//   DGPW  projector  (1, d + 1, d_text): the d weight rows then the bias row
//   DGTK  tokens     (1, rows, d_text)

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

std::vector<FrameFeature> read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const std::vector<FrameFeature>& frames,
                    DType dtype = DType::f32);

ProjectorWeights read_projector(const std::filesystem::path& path);
void write_projector(const std::filesystem::path& path, const ProjectorWeights& weights, DType dtype = DType::f64);

Matrix read_tokens(const std::filesystem::path& path);
void write_tokens(const std::filesystem::path& path, const Matrix& tokens, DType dtype = DType::f64);

}  // namespace drivekit::tokmath
