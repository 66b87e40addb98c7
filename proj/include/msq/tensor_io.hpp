#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "msq/tensor.hpp"

namespace msq {

// Matrix file layout:
//   line 1   : decimal byte length L of the JSON header, then '\n'
//   next L   : {"rows":R,"cols":C,"dtype":"f32","byte_order":"little"}
//   remainder: R*C little-endian IEEE-754 binary32 values, row-major
std::string encode_matrix(const Matrix2D& m);
Matrix2D decode_matrix(std::string_view bytes);

Matrix2D read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix2D& m);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over `path` on success, so a
/// failed run never leaves a partial file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace msq
