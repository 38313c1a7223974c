#include "qlqr/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qlqr/errors.hpp"

namespace qlqr::csv {

std::string format(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Writer::Writer(const std::filesystem::path& path,
               const std::vector<std::string>& header)
    : path_(path) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += header[i];
  }
  buffer_ += '\n';
}

Writer& Writer::add(double v) { return add(format(v)); }

Writer& Writer::add(long long v) { return add(std::to_string(v)); }

Writer& Writer::add(const std::string& v) {
  if (row_started_) buffer_ += ',';
  buffer_ += v;
  row_started_ = true;
  return *this;
}

Writer& Writer::add_empty() { return add(std::string()); }

void Writer::end_row() {
  buffer_ += '\n';
  row_started_ = false;
}

void Writer::close() {
  std::ofstream out(path_, std::ios::binary);
  if (!out) throw Error("cannot write " + path_.string());
  out << buffer_;
  if (!out) throw Error("write failed: " + path_.string());
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("file not found: " + path.string());
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    t.push_back(std::move(row));
  }
  return t;
}

}  // namespace qlqr::csv
