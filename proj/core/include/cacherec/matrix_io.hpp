#pragma once

// Plain-text serialization.
//
// Matrices use a triplet format: a header line "# dims R C" followed by one
// "i j value" line per nonzero entry (0-based indices). Vectors hold one
// value per line. Values are written with 17 significant digits so a write
// followed by a read reproduces every double bit for bit.

#include <filesystem>
#include <iosfwd>

#include "cacherec/linalg.hpp"

namespace cacherec {

void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);

void write_vector(std::ostream& out, const Vector& v);
Vector read_vector(std::istream& in);

void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);
void save_vector(const std::filesystem::path& path, const Vector& v);
Vector load_vector(const std::filesystem::path& path);

/// Shortest-roundtrip decimal text with 17 significant digits.
std::string format_double(double v);

}  // namespace cacherec
