#pragma once

#include <string>

#include "spacebind/matrix.hpp"

namespace spacebind {

// Writes to <path>.tmp then renames, so readers never see partial files.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

// Raw little-endian float32, row-major, no header.
void write_f32_matrix(const std::string& path, const Matrix& m);
// Shape comes from the caller; the file length must be rows*cols*4.
Matrix read_f32_matrix(const std::string& path, std::size_t rows, std::size_t cols);

void ensure_dir(const std::string& dir);

} // namespace spacebind
