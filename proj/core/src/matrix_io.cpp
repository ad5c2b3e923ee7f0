#include "cacherec/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cacherec/error.hpp"

namespace cacherec {
namespace {

double parse_double(std::string_view token, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw DataError("line " + std::to_string(line_no) + ": bad number '" + std::string(token) +
                    "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out << "# dims " << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (v != 0.0 || std::signbit(v)) out << i << ' ' << j << ' ' << format_double(v) << '\n';
    }
  }
}

Matrix read_matrix(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  Index rows = -1;
  Index cols = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream hs(line);
    std::string hash, key;
    hs >> hash >> key >> rows >> cols;
    if (hash != "#" || key != "dims" || hs.fail() || rows < 0 || cols < 0) {
      throw DataError("matrix header must read '# dims R C'");
    }
    break;
  }
  if (rows < 0) throw DataError("matrix stream is empty");
  Matrix m = Matrix::Zero(rows, cols);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Index i = -1;
    Index j = -1;
    std::string value;
    ls >> i >> j >> value;
    if (ls.fail() || i < 0 || j < 0 || i >= rows || j >= cols) {
      throw DataError("line " + std::to_string(line_no) + ": bad triplet '" + line + "'");
    }
    m(i, j) = parse_double(value, line_no);
  }
  return m;
}

void write_vector(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << '\n';
}

Vector read_vector(std::istream& in) {
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    values.push_back(parse_double(std::string_view(line).substr(first, last - first + 1), line_no));
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_matrix(out, m);
}

Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_matrix(in);
}

void save_vector(const std::filesystem::path& path, const Vector& v) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_vector(out, v);
}

Vector load_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_vector(in);
}

}  // namespace cacherec
