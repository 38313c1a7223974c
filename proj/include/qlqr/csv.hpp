#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace qlqr::csv {

/// Shortest decimal string that parses back to exactly `v`.
std::string format(double v);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path,
                  const std::vector<std::string>& header);

  Writer& add(double v);
  Writer& add(long long v);
  Writer& add(const std::string& v);
  Writer& add_empty();
  void end_row();
  void close();

 private:
  std::filesystem::path path_;
  std::string buffer_;
  bool row_started_ = false;
};

using Table = std::vector<std::vector<std::string>>;

/// Header row first.
Table read(const std::filesystem::path& path);

}  // namespace qlqr::csv
